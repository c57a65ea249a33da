#pragma once

#include "acs/grid.hpp"

namespace acs {

// Moser smoothing kernel chi(y) = q(|y|^2) * (1-|y|^2)^4 on the unit ball of
// R^{2n}, with vanishing moments int y^I chi = 0 for 1 <= |I| <= L. The radial
// polynomial q kills the even moments; odd moments vanish by symmetry of the
// quadrature. The stored quadrature (spherical-radial product rule) is both
// the build rule for the moment system and the rule S_t integrates with, so
// the discrete operator inherits the vanishing moments exactly.
struct Mollifier {
  int L = 1;
  std::vector<double> q_coeffs;        // q(s) = sum_j q_coeffs[j] s^j
  std::vector<Vec4> quad_nodes;        // nodes in the unit ball
  std::vector<double> quad_weights;    // rule weights
  std::vector<double> chi_at_nodes;    // chi evaluated at the nodes

  double chi(const Vec4& y) const;     // closed form, 0 outside the unit ball
  // Moment sum_q W_q chi(w_q) w_q^I on the build quadrature.
  double moment(const Idx4& I) const;
  std::string to_json() const;
  static Mollifier from_json(const std::string& text);
};

// Solves the radial moment system for the requested order (1 <= L <= 8).
Mollifier build_mollifier(int L);

// A plain normalized bump (L = 1), used by the dyadic norm estimator.
const Mollifier& plain_mollifier();

// S_t u(x) = sum_q W_q chi(w_q) u(x - t w_q), evaluated at every node of u's
// grid. `interp_degree` controls the Lagrange interpolation of u (2 or 4).
// With compact_support, u reads as zero outside its box (and outside its
// support bounding box); otherwise evaluation is restricted to nodes whose
// sampling cube stays inside the grid/mask, and the output is masked there.
GridFunction smooth_field(const GridFunction& u, double t, const Mollifier& m,
                          int interp_degree = 4, bool compact_support = true,
                          const std::vector<std::uint8_t>* eval_mask = nullptr);

// Spec-facing wrapper with the range check t in (0, t_max]. Records whether
// the kernel is narrower than two grid cells in `underresolved`.
struct SmoothResult {
  GridFunction field;
  bool underresolved = false;
};
SmoothResult smooth(const GridFunction& u, double t, const Mollifier& m,
                    double t_max = 0.25, int interp_degree = 4,
                    bool compact_support = true);

}  // namespace acs
