#pragma once

#include "acs/grid.hpp"

namespace acs {

// One-dimensional finite-difference derivative along a real axis, mask-aware:
// centered 5-point (order 4) where the stencil fits inside the mask run,
// 3-point one-sided (order 2) near run ends. Throws if a run is shorter
// than 3 nodes, naming the offending node.
GridFunction real_partial(const GridFunction& u, int axis);

// Wirtinger derivative: 0.5*(d/dx_a -+ i d/dy_a); conjugate=false gives
// d/dz_a, conjugate=true gives d/dzbar_a. Componentwise on non-scalars.
GridFunction wirtinger_derivative(const GridFunction& u, int alpha, bool conjugate);

// dbar coefficient of a (0,1)-form (psi1, psi2): d_1bar psi2 - d_2bar psi1.
GridFunction dbar_coeff_01(const GridFunction& psi);

// All four real partials at once (shares run scans).
std::array<GridFunction, kND> gradient(const GridFunction& u);

// Measured stencil accuracy: max |numeric - exact| over in-mask nodes of the
// derivative of a closed form. Used to pin "stencil tolerance" in tests.
double stencil_error(const GridFunction& u, int alpha, bool conjugate,
                     const std::function<cplx(const Vec4&)>& exact_deriv);

}  // namespace acs
