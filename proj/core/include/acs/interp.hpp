#pragma once

#include "acs/grid.hpp"

namespace acs {

// Tensor-product Lagrange interpolation of an unmasked box field at an
// arbitrary point. degree in {1,2,4}; the base cell is clamped at the box
// edges. Out-of-box points read as zero when zero_outside is set (compact
// support convention), otherwise clamp.
cplx interp_lagrange(const GridFunction& u, int comp, const Vec4& x,
                     int degree = 4, bool zero_outside = false);

// Derivative of the same interpolant along a real axis.
cplx interp_lagrange_deriv(const GridFunction& u, int comp, const Vec4& x,
                           int axis, int degree = 4, bool zero_outside = false);

// Moving-least-squares (degree 2, Wendland weight) over scattered samples.
// Used to resample pushed-forward fields onto the grid and to interpolate
// operator outputs from target subsamples.
class MlsInterpolator {
public:
  MlsInterpolator(std::vector<Vec4> points, std::vector<cplx> values, double radius);
  cplx eval(const Vec4& x) const;
  double radius() const { return radius_; }

private:
  std::vector<Vec4> pts_;
  std::vector<cplx> vals_;
  double radius_;
  // uniform binning for neighbor queries
  Vec4 lo_{}, hi_{};
  double cell_ = 1.0;
  std::array<int, kND> nbins_{};
  std::vector<std::vector<int>> bins_;
  std::size_t bin_of(const Vec4& x) const;
  void neighbors(const Vec4& x, double R, std::vector<int>& out) const;
};

// Masked interpolation on a grid: Lagrange if the full stencil is in-mask,
// otherwise MLS over in-mask nodes within 2.5h.
cplx interp_masked(const GridFunction& u, int comp, const Vec4& x, int degree = 2);

}  // namespace acs
