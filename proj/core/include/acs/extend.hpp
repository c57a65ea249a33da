#pragma once

#include <memory>

#include "acs/domain.hpp"
#include "acs/grid.hpp"

namespace acs {

// Reflection extension of Stein type: values at an exterior point x come from
// three reflected points x* - k s nu (k = 1,2,3) across the boundary base
// point x*, with weights (6, -8, 3) solving the degree-2 reproduction system,
// times an outer cutoff in the normal distance s. (Eu)|_D = u exactly at
// in-mask nodes; Eu is supported in {s < delta2}.
struct ExtensionConfig {
  double delta1 = 0.10;  // cutoff starts
  double delta2 = 0.30;  // cutoff ends (support bound)
  int interp_degree = 2;
};

class ExtensionOperator {
public:
  ExtensionOperator(std::shared_ptr<const DefiningFunction> rho, ExtensionConfig cfg = {});

  const DefiningFunction& domain() const { return *rho_; }
  const ExtensionConfig& config() const { return cfg_; }

  struct Collar {
    Vec4 base{};   // boundary base point x*
    Vec4 nu{};     // outward unit direction (x - x*)/s
    double s = 0;  // normal distance
    bool exterior = false;
  };
  Collar collar_at(const Vec4& x) const;
  double cutoff(double s) const;

  // pointwise extension of a masked grid field (componentwise)
  cplx eval(const GridFunction& u, int comp, const Vec4& x) const;
  // pointwise extension of a closed-form density defined on D only
  cplx eval_closed(const std::function<cplx(const Vec4&)>& u, const Vec4& x) const;

  // whole-grid extension onto u's box (unmasked output, zero outside support)
  GridFunction extend_grid(const GridFunction& u) const;

private:
  std::shared_ptr<const DefiningFunction> rho_;
  ExtensionConfig cfg_;
};

// Spec-level op: extend u (masked to {rho <= 0}) to the box.
GridFunction extend(const GridFunction& u, std::shared_ptr<const DefiningFunction> rho,
                    ExtensionConfig cfg = {});

// Commutator probe [dbar, E]u = dbar Eu - E dbar u.
struct CommutatorReport {
  double interior_sup = 0;            // max over the D-mask (should be stencil-sized)
  std::vector<double> etas;           // shell widths
  std::vector<double> shell_norms;    // order-a norm estimate on each shell
  double fitted_exponent = 0;         // log-log slope of shell_norms vs etas
};

// Grid-field version (interior check + shell decay from interpolated u).
CommutatorReport commutator_probe(const GridFunction& u,
                                  std::shared_ptr<const DefiningFunction> rho,
                                  const std::vector<double>& etas, double a = 1.0,
                                  ExtensionConfig cfg = {});

// Closed-form version: u and dbar u given exactly; shells are sampled off the
// grid, so thin shells are resolved.
CommutatorReport commutator_probe_closed(
    const std::function<cplx(const Vec4&)>& u,
    const std::array<std::function<cplx(const Vec4&)>, kNC>& dbar_u,
    std::shared_ptr<const DefiningFunction> rho, const std::vector<double>& etas,
    double a = 1.0, ExtensionConfig cfg = {});

}  // namespace acs
