#pragma once

#include <memory>

#include "acs/domain.hpp"
#include "acs/extend.hpp"
#include "acs/grid.hpp"

namespace acs {

// (0,q)-form on the D-mask; q = 1 stores the two dzbar coefficients
// (rank Covector), q = 2 stores the single dzbar1^dzbar2 coefficient.
struct FormField {
  int q = 1;
  GridFunction coeff;

  static FormField zero_like(const GridSpec& sp, int q,
                             const std::vector<std::uint8_t>& mask);
};

struct KernelConfig {
  double delta_reg = 0.0;        // regularization added to the pairings
  int target_count = 256;        // interior target subsample
  bool singular_correction = true;  // cell-midpoint + singular-cell correction
  double near_radius_cells = 2.5;   // subtraction neighborhood (in cells)
  double mu = 4.0 * kNC;         // gain exponent (reported only)
  double fd_step_factor = 0.3;   // micro-stencil (fraction of h) for dbar P
  std::size_t max_kernel_evals = std::size_t(4) << 32;  // quadrature budget
};

// Levi-polynomial section g(zeta, z) and pairing Phi = <g, zeta - z>.
struct LeraySection {
  C2 g;
  cplx phi;
};
LeraySection leray_section(const DefiningFunction& rho, const Vec4& zeta, const Vec4& z);

// Homotopy operators P (on (0,1)) and Q (on (0,2)) for the pair (D, box),
// built from the Bochner-Martinelli-Koppelman kernel against the extended
// density plus the Koppelman-Leray transition kernel against the extension
// commutator. On D: phi = dbar P phi + Q dbar phi.
class Homotopy {
public:
  Homotopy(std::shared_ptr<const DefiningFunction> rho, ExtensionConfig ecfg = {},
           KernelConfig kcfg = {});

  const DefiningFunction& domain() const { return *rho_; }
  const KernelConfig& config() const { return kcfg_; }
  const ExtensionOperator& extension() const { return E_; }

  // Deterministic low-discrepancy interior target nodes (flat indices) whose
  // micro-stencil stays inside D.
  std::vector<std::size_t> targets(const GridSpec& sp, int count) const;

  struct Prepared01 {
    GridFunction Ephi;                       // extended (0,1) density on the box
    GridFunction comm;                       // [dbar, E] phi (0,2) coeff on the box
    std::array<GridFunction, kNC> grads;     // per component: 4 real partials
  };
  Prepared01 prepare01(const FormField& phi) const;

  struct Prepared2 {
    GridFunction Eg;     // extended (0,2) density
    GridFunction grads;  // 4 real partials of Eg (rank Matrix)
  };
  Prepared2 prepare2(const GridFunction& g_coeff) const;

  cplx P_at(const Prepared01& p, const Vec4& z) const;
  C2 Q_at(const Prepared2& p, const Vec4& z) const;
  C2 dbarP_at(const Prepared01& p, const Vec4& z) const;  // micro-stencil

  // P phi on every in-mask node (used by the norm-gain probe and the solver).
  GridFunction P_on_mask(const FormField& phi) const;

private:
  std::shared_ptr<const DefiningFunction> rho_;
  ExtensionOperator E_;
  KernelConfig kcfg_;
  GridSpec sp_;
  double h_ = 0;
  double cell_vol_ = 0;

  struct Site {
    std::size_t node;
    Vec4 x;
  };
  std::vector<Site> support_sites_;  // extension support (B1/B2 integration)
  std::vector<Site> shell_sites_;    // exterior collar (transition kernel)
  struct LerayCache {
    C2 drho;
    cplx hess[kNC][kNC];
  };
  std::vector<LerayCache> shell_cache_;

  mutable std::atomic<std::size_t> kernel_evals_{0};
  void charge(std::size_t n) const;
};

// Spec-level ops -------------------------------------------------------

// q = 1: returns P phi at the targets (plus the target list);
// q = 2: returns Q psi as a (0,1) FormField sample at the targets.
struct HomotopyApplyResult {
  std::vector<std::size_t> target_nodes;
  std::vector<cplx> p_values;       // q = 1
  std::vector<C2> q_values;         // q = 2
};
HomotopyApplyResult homotopy_apply(const FormField& phi,
                                   std::shared_ptr<const DefiningFunction> rho,
                                   ExtensionConfig ecfg = {}, KernelConfig kcfg = {});

struct ResidualReport {
  std::vector<std::size_t> target_nodes;
  std::vector<C2> residual;  // phi - dbar P phi - Q dbar phi per component
  double sup = 0;
  std::string grid_tag;
};
ResidualReport homotopy_residual(const FormField& phi,
                                 std::shared_ptr<const DefiningFunction> rho,
                                 ExtensionConfig ecfg = {}, KernelConfig kcfg = {});

}  // namespace acs
