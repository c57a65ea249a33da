#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "acs/util.hpp"

namespace acs {

// Real dimension is fixed at 2n with n = 2 complex variables. Types stay
// n-generic through kNC where practical; acceptance runs always use n = 2.
inline constexpr int kNC = 2;       // complex dimension n
inline constexpr int kND = 2 * kNC; // real dimension 2n

using Vec4 = std::array<double, kND>;
using Idx4 = std::array<int, kND>;
using C2 = std::array<cplx, kNC>;

inline Vec4 operator+(Vec4 a, const Vec4& b) {
  for (int i = 0; i < kND; ++i) a[i] += b[i];
  return a;
}
inline Vec4 operator-(Vec4 a, const Vec4& b) {
  for (int i = 0; i < kND; ++i) a[i] -= b[i];
  return a;
}
inline Vec4 operator*(double s, Vec4 a) {
  for (int i = 0; i < kND; ++i) a[i] *= s;
  return a;
}
inline double dot(const Vec4& a, const Vec4& b) {
  double s = 0;
  for (int i = 0; i < kND; ++i) s += a[i] * b[i];
  return s;
}
inline double norm2(const Vec4& a) { return std::sqrt(dot(a, a)); }

// Complex view of a real point: z_a = x_{2a} + i x_{2a+1}.
inline C2 to_complex(const Vec4& x) {
  return {cplx(x[0], x[1]), cplx(x[2], x[3])};
}
inline Vec4 to_real(const C2& z) {
  return {z[0].real(), z[0].imag(), z[1].real(), z[1].imag()};
}

// Regular grid over a box in R^{2n}. Points per axis are odd and >= 5 so that
// a symmetric box has the origin as a node.
struct GridSpec {
  Vec4 lower{};
  Vec4 upper{};
  Idx4 npts{};

  GridSpec() = default;
  GridSpec(const Vec4& lo, const Vec4& hi, const Idx4& n);
  static GridSpec cube(double halfwidth, int n_per_axis);

  double h(int axis) const { return (upper[axis] - lower[axis]) / (npts[axis] - 1); }
  double h_max() const;
  double h_min() const;
  std::size_t node_count() const;
  Vec4 coord(const Idx4& i) const;
  std::size_t flat(const Idx4& i) const;
  Idx4 unflat(std::size_t k) const;
  bool contains(const Vec4& x, double pad = 0.0) const;
  bool operator==(const GridSpec& o) const;
};

enum class Rank { Scalar, Covector, Matrix };

inline int rank_mult(Rank r) {
  switch (r) {
    case Rank::Scalar: return 1;
    case Rank::Covector: return kNC;
    case Rank::Matrix: return kNC * kNC;
  }
  return 1;
}

// Complex-valued field sampled on a grid, with an optional membership mask.
// Masked-out nodes hold a NaN sentinel that arithmetic never reads.
class GridFunction {
public:
  GridFunction() = default;
  GridFunction(GridSpec spec, Rank rank);

  const GridSpec& spec() const { return spec_; }
  Rank rank() const { return rank_; }
  int mult() const { return rank_mult(rank_); }
  std::size_t nodes() const { return spec_.node_count(); }

  cplx& at(std::size_t node, int comp = 0) { return values_[node * mult_ + comp]; }
  cplx at(std::size_t node, int comp = 0) const { return values_[node * mult_ + comp]; }
  cplx& at(const Idx4& i, int comp = 0) { return at(spec_.flat(i), comp); }
  cplx at(const Idx4& i, int comp = 0) const { return at(spec_.flat(i), comp); }

  bool in_mask(std::size_t node) const { return mask_.empty() || mask_[node] != 0; }
  bool has_mask() const { return !mask_.empty(); }
  void set_mask(std::vector<std::uint8_t> mask);
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  std::size_t mask_count() const;

  // Applies the sentinel to masked-out nodes.
  void seal_mask();

  double sup_abs() const;          // max |value| over in-mask nodes/components
  GridFunction component(int c) const;

  // Stencil accuracy metadata, recorded by derivative ops.
  int interior_order = 0;
  int edge_order = 0;

  std::vector<cplx>& raw() { return values_; }
  const std::vector<cplx>& raw() const { return values_; }

  static cplx unset() { return {std::numeric_limits<double>::quiet_NaN(),
                                std::numeric_limits<double>::quiet_NaN()}; }

private:
  GridSpec spec_;
  Rank rank_ = Rank::Scalar;
  int mult_ = 1;
  std::vector<cplx> values_;
  std::vector<std::uint8_t> mask_;
};

// Samples a pointwise evaluator at every node; the mask is all-true.
// Rejects non-finite samples, reporting the offending node coordinates.
GridFunction make_grid(const GridSpec& spec, Rank rank,
                       const std::function<void(const Vec4&, cplx*)>& expr);
GridFunction make_grid_scalar(const GridSpec& spec,
                              const std::function<cplx(const Vec4&)>& expr);

// Linear combinations respect masks (intersection) and never read sentinels.
GridFunction axpy(cplx a, const GridFunction& x, const GridFunction& y); // a*x + y
GridFunction scale(cplx a, const GridFunction& x);

// Restricts u to the nodes where keep(node) holds.
GridFunction restrict_mask(const GridFunction& u,
                           const std::function<bool(std::size_t)>& keep);

// Dump formats: CSV (multi-index, coordinates, values) and a compact
// little-endian binary with a header carrying the spec.
void dump_csv(const GridFunction& u, std::ostream& os);
void dump_binary(const GridFunction& u, const std::string& path);
GridFunction load_binary(const std::string& path);

}  // namespace acs
