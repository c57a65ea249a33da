#pragma once

#include "acs/grid.hpp"

namespace acs {

// Near-identity map F = I + f on a box, with f stored as a sampled complex
// displacement field (rank Covector: f^1, f^2). Evaluation interpolates the
// displacement; derivatives differentiate the interpolant. Maps may also
// carry closed forms, in which case those are used exactly.
class MapField {
public:
  MapField() = default;

  // identity on a grid
  static MapField identity(const GridSpec& spec);

  // sampled from closed-form displacement (optionally with exact derivatives)
  using CEval = std::function<C2(const Vec4&)>;
  static MapField from_closed_form(const GridSpec& spec, CEval f,
                                   CEval df_dz1 = nullptr, CEval df_dz2 = nullptr,
                                   CEval df_dz1bar = nullptr, CEval df_dz2bar = nullptr);
  static MapField from_grid(GridFunction displacement);

  const GridSpec& spec() const { return disp_.spec(); }
  const GridFunction& displacement() const { return disp_; }
  bool has_closed_form() const { return bool(cf_); }

  C2 f(const Vec4& x) const;        // displacement at x
  C2 apply(const Vec4& x) const;    // x + f(x), complex view
  Vec4 apply_real(const Vec4& x) const;

  // Wirtinger derivatives of the displacement components:
  // dz[a][b] = d f^b / d z_a, dzb[a][b] = d f^b / d zbar_a.
  void wirtinger(const Vec4& x, cplx dz[kNC][kNC], cplx dzb[kNC][kNC]) const;

  // sup over grid nodes of the real Jacobian norm of f (max row sum)
  double sup_Df() const;

  // Inverse displacement by damped fixed point x = w - f(x); tolerance 1e-10,
  // at most 200 sweeps. Fails on non-convergence.
  MapField inverse() const;

  // Composition this âˆ˜ other (i.e. x -> this(other(x))), sampled on `spec`.
  MapField compose_after(const MapField& other) const;

  int interp_degree = 4;

private:
  GridFunction disp_;  // rank Covector
  CEval cf_;
  CEval cf_dz_[kNC] = {nullptr, nullptr};
  CEval cf_dzb_[kNC] = {nullptr, nullptr};
};

}  // namespace acs
