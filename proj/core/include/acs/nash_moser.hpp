#pragma once

#include <memory>
#include <optional>

#include "acs/domain.hpp"
#include "acs/homotopy.hpp"
#include "acs/mollifier.hpp"
#include "acs/structures.hpp"
#include "acs/zygmund.hpp"

namespace acs {

// p(d) = d/(2(2-d)) + 1/(2(d-1)), the feasibility threshold for xi.
double p_of_d(double d);
// d(xi) = (1 + 3 xi + sqrt(xi^2 - 2 xi - 1)) / (1 + 2 xi), xi > 1 + sqrt(2).
double d_of_xi(double xi);
// Exact-rational evaluation when the discriminant is a perfect square.
bool d_of_xi_exact(const Rational& xi, Rational& out);

struct Parameters {
  double r = 6.0;
  double s = 2.25;
  double kappa = 0.01;
  double gamma = 0.01;
  double xi = 0;     // r - s - 1/2
  double d = 0;
  double alpha = 0;
  double beta = 0;
  double ell = 0;    // target regularity s + alpha/(alpha+beta) (r - s)
  double t0 = 0;
  double delta_r = 0;
  double cr_star = 0;  // frozen Low/High monitor constant (from the budget)
  int L = 6;           // smoothing moment order, ceil(r)
  double margin = 1e-3;

  // constraint_1..3 of the iteration proof; throws naming the binding one.
  void check_constraints() const;
};

// Chooses d slightly inside the feasible d(.), then beta and alpha with small
// margins, and verifies the three constraints. t0/delta_r are filled in by
// t0_constraints once a fitted budget exists.
Parameters parameter_solve(double r, double s, double kappa, double gamma,
                           double margin = 1e-3);

struct T0Result {
  double t0 = 0;
  double delta_r = 0;
  int argmin = -1;              // which of the four candidates bound t0
  std::array<double, 4> candidates{};
};
T0Result t0_constraints(const Parameters& p, const StabilityBudget& budget);

// Operator bundle for one run; the mollifier order follows L = ceil(r).
struct SolverOps {
  Mollifier mol;
  ExtensionConfig ecfg;
  KernelConfig kcfg;
  OffsetSet offsets;  // fixed offset set, ledger is like-for-like across steps
  double t_max = 0.25;
};
SolverOps make_solver_ops(const Parameters& p, const GridSpec& sp,
                          ExtensionConfig ecfg = {}, KernelConfig kcfg = {});

struct CorrectionResult {
  MapField F;  // I + f
  MapField G;  // inverse
  double sup_Df = 0;
  double sup_Dg = 0;
  double f_norm2 = 0;  // |f|_{B0,2} estimate
};
// f = -S_t E P A componentwise; errors if |Df|_0 >= 1/2.
CorrectionResult correction_step(const Structure& A,
                                 std::shared_ptr<const DefiningFunction> rho,
                                 double t, const SolverOps& ops);

struct LedgerRow {
  int j = 0;
  double t = 0;
  double a = 0;        // |A_j|_s
  double L = 0;        // |A_j|_r
  double levi_min = 0;
  double defect = 0;
  double f_norm2 = 0;
  double cauchy_increment = 0;
  bool low_ok = true, high_ok = true, envelope_ok = true;
};

struct IterationState {
  int j = 0;
  double log_t0 = 0;   // schedule kept in log space: log t_j = d^j log t0
  double log_t = 0;
  Structure A;
  std::shared_ptr<DefiningFunction> rho;
  MapField Ftilde, Gtilde;
  std::vector<LedgerRow> ledger;
  double levi0 = 0;
  double rho_drift_c2 = 0;  // |rho_j - rho_0|_2 (sampled)
  std::shared_ptr<const DefiningFunction> rho0;

  double t() const { return std::exp(log_t); }
};

IterationState make_initial_state(Structure A0, std::shared_ptr<DefiningFunction> rho0,
                                  const Parameters& p, const SolverOps& ops);

// One Nash-Moser step: correction, pushforwards, composition bookkeeping,
// schedule update t_{j+1} = t_j^d, ledger and monitor refresh.
IterationState iterate_once(IterationState state, const Parameters& p,
                            const SolverOps& ops);

struct RunResult {
  IterationState state;
  Parameters params;
  bool converged = false;
  std::string stop_reason;
  std::vector<double> cauchy_increments;
  bool cauchy_summable = true;
  double jacobian_dev = 0;  // |D Ftilde - I|_0
};

RunResult run_solver(Structure A0, std::shared_ptr<DefiningFunction> rho0,
                     const Parameters& p, const SolverOps& ops, int max_steps,
                     double target_sup = 1e-3);

// Fits the budget constants on the initial domain (oracle calibration corpus,
// Levi perturbation family, composition probe). Frozen afterwards.
StabilityBudget calibrate_budget(std::shared_ptr<DefiningFunction> rho0,
                                 const GridSpec& sp, const Parameters& p,
                                 const SolverOps& ops, double t_cal = 0.2);

// Builtin oracle map families (0: polynomial (zbar2^2, 0);
// 1: polynomial (zbar2^2, zbar1 zbar2); 2: trigonometric), with exact
// Wirtinger derivatives.
MapField oracle_phi_family(const GridSpec& sp, int which, double amp);

}  // namespace acs
