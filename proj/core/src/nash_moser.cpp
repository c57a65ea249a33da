#include "acs/nash_moser.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "acs/interp.hpp"
#include "acs/stencil.hpp"

namespace acs {

double p_of_d(double d) {
  require(d > 1.0 && d < 2.0, "p_of_d: d must lie in (1,2)");
  return d / (2.0 * (2.0 - d)) + 1.0 / (2.0 * (d - 1.0));
}

double d_of_xi(double xi) {
  double disc = xi * xi - 2.0 * xi - 1.0;
  require(disc >= 0, "d_of_xi: xi <= 1 + sqrt(2), discriminant negative");
  return (1.0 + 3.0 * xi + std::sqrt(disc)) / (1.0 + 2.0 * xi);
}

bool d_of_xi_exact(const Rational& xi, Rational& out) {
  Rational disc = xi * xi - Rational(2, 1) * xi - Rational::of(1);
  Rational root;
  if (disc.num < 0 || !disc.try_sqrt(root)) return false;
  out = (Rational::of(1) + Rational(3, 1) * xi + root) /
        (Rational::of(1) + Rational(2, 1) * xi);
  return true;
}

void Parameters::check_constraints() const {
  require(d > 1.0 && d < 2.0, "Parameters: d must lie in (1,2)");
  require(xi > p_of_d(d), "Parameters: xi <= p(d), schedule infeasible");
  if (!(alpha * d + beta < r - s - 0.5 - kappa - gamma))
    fail("Parameters: constraint_1 (alpha d + beta < r-s-1/2-kappa-gamma) binds");
  if (!(alpha * (2.0 - d) > 0.5 + kappa))
    fail("Parameters: constraint_2 (alpha (2-d) > 1/2+kappa) binds");
  if (!(beta * (d - 1.0) > 0.5 + kappa))
    fail("Parameters: constraint_3 (beta (d-1) > 1/2+kappa) binds");
}

Parameters parameter_solve(double r, double s, double kappa, double gamma,
                           double margin) {
  require(r > 5.0, "parameter_solve: needs r > 5");
  require(s > 2.0 && s < 3.0, "parameter_solve: needs 2 < s < 3");
  require(kappa >= 0 && gamma >= 0, "parameter_solve: kappa, gamma >= 0");
  Parameters p;
  p.r = r;
  p.s = s;
  p.kappa = kappa;
  p.gamma = gamma;
  p.margin = margin;
  p.xi = r - s - 0.5;
  require(p.xi > 1.0 + std::sqrt(2.0),
          "parameter_solve: xi = r-s-1/2 too small (d(xi) undefined)");
  // feasible d once kappa, gamma > 0: (1+2 kappa) p(d) < xi - kappa - gamma
  double xi_eff = (p.xi - kappa - gamma) / (1.0 + 2.0 * kappa);
  require(xi_eff > 1.0 + std::sqrt(2.0),
          "parameter_solve: constraint set empty (kappa/gamma too large)");
  p.d = d_of_xi(xi_eff) * (1.0 - margin);
  p.beta = (0.5 + kappa) / (p.d - 1.0) * (1.0 + margin);
  p.alpha = (p.xi - p.beta - kappa - gamma) / p.d * (1.0 - margin);
  p.ell = s + p.alpha / (p.alpha + p.beta) * (r - s);
  p.L = int(std::ceil(r));
  p.check_constraints();
  return p;
}

T0Result t0_constraints(const Parameters& p, const StabilityBudget& budget) {
  require(budget.complete(), "t0_constraints: fitted constants missing or <= 0");
  T0Result out;
  double delta_star = std::min(budget.eps_D0 / (4.0 * budget.C_second),
                               budget.delta_rho0);
  out.candidates[0] = std::pow(1.0 / budget.Css_star, 2.0 / (2.0 * p.alpha - 1.0));
  out.candidates[1] = std::pow(delta_star / budget.C2_star, 1.0 / p.alpha);
  // the kappa term binds only when 2 C_r^* > 1
  out.candidates[2] = (2.0 * budget.Cr_star > 1.0)
                          ? std::pow(1.0 / (2.0 * budget.Cr_star), 1.0 / p.kappa)
                          : 1e300;
  out.candidates[3] = std::pow(4.0, -2.0 / (p.d - 1.0));
  out.t0 = 1e300;
  for (int i = 0; i < 4; ++i)
    if (out.candidates[i] < out.t0) {
      out.t0 = out.candidates[i];
      out.argmin = i;
    }
  out.delta_r = std::pow(out.t0, p.alpha);
  return out;
}

SolverOps make_solver_ops(const Parameters& p, const GridSpec& sp,
                          ExtensionConfig ecfg, KernelConfig kcfg) {
  SolverOps ops;
  ops.mol = build_mollifier(p.L);
  ops.ecfg = ecfg;
  ops.kcfg = kcfg;
  ops.offsets = OffsetSet::standard(sp);
  return ops;
}

CorrectionResult correction_step(const Structure& A,
                                 std::shared_ptr<const DefiningFunction> rho,
                                 double t, const SolverOps& ops) {
  require(t > 0 && t <= ops.t_max, "correction_step: t outside the smoothing range");
  const GridSpec& sp = A.A.spec();
  Homotopy H(rho, ops.ecfg, ops.kcfg);
  const auto& mask = A.A.mask();

  GridFunction f_disp(sp, Rank::Covector);
  for (int beta = 0; beta < kNC; ++beta) {
    FormField Ab;
    Ab.q = 1;
    Ab.coeff = GridFunction(sp, Rank::Covector);
    Ab.coeff.set_mask(mask);
    for (std::size_t k = 0; k < sp.node_count(); ++k) {
      if (!mask[k]) continue;
      Ab.coeff.at(k, 0) = A.A.at(k, 0 * kNC + beta);
      Ab.coeff.at(k, 1) = A.A.at(k, 1 * kNC + beta);
    }
    Ab.coeff.seal_mask();
    GridFunction PA = H.P_on_mask(Ab);
    GridFunction EPA = H.extension().extend_grid(PA);
    GridFunction SEPA = smooth_field(EPA, t, ops.mol, 4, true);
    for (std::size_t k = 0; k < sp.node_count(); ++k)
      f_disp.at(k, beta) = -SEPA.at(k);
  }

  CorrectionResult res;
  res.F = MapField::from_grid(f_disp);
  res.sup_Df = res.F.sup_Df();
  if (!(res.sup_Df < 0.5)) {
    std::ostringstream os;
    os << "correction_step: |Df|_0 = " << res.sup_Df << " >= 1/2, aborting";
    fail(os.str());
  }
  res.G = res.F.inverse();
  res.sup_Dg = res.G.sup_Df();
  res.f_norm2 = znorm(res.F.displacement(), 2.0);
  return res;
}

IterationState make_initial_state(Structure A0, std::shared_ptr<DefiningFunction> rho0,
                                  const Parameters& p, const SolverOps& ops) {
  IterationState st;
  require(p.t0 > 0, "make_initial_state: parameters carry no t0");
  st.log_t0 = std::log(p.t0);
  st.log_t = st.log_t0;
  st.A = std::move(A0);
  st.rho = rho0;
  st.rho0 = rho0;
  st.Ftilde = MapField::identity(st.A.A.spec());
  st.Gtilde = MapField::identity(st.A.A.spec());
  LedgerRow row;
  row.j = 0;
  row.t = p.t0;
  row.a = zygmund_norm(st.A.A, p.s, NormMethod::FiniteDifference, &ops.offsets).total;
  row.L = zygmund_norm(st.A.A, p.r, NormMethod::FiniteDifference, &ops.offsets).total;
  st.A.norm_s = row.a;
  st.A.norm_r = row.L;
  LeviReport lr = levi_min(*rho0, 200);
  row.levi_min = lr.lambda_min;
  st.levi0 = lr.lambda_min;
  row.defect = integrability_defect(st.A).sup;
  st.ledger.push_back(row);
  return st;
}

static std::string ledger_text(const std::vector<LedgerRow>& rows) {
  std::ostringstream os;
  for (const auto& r : rows)
    os << "  j=" << r.j << " t=" << r.t << " a=" << r.a << " L=" << r.L
       << " levi=" << r.levi_min << "\n";
  return os.str();
}

IterationState iterate_once(IterationState state, const Parameters& p,
                            const SolverOps& ops) {
  const GridSpec& sp = state.A.A.spec();
  double t_j = state.t();
  {
    LedgerRow& cur = state.ledger.back();
    cur.envelope_ok = cur.a <= std::pow(t_j, p.alpha) * (1.0 + 1e-12);
  }

  CorrectionResult corr = correction_step(state.A, state.rho, t_j, ops);
  state.ledger.back().f_norm2 = corr.f_norm2;

  // transport the defining function (extended blend only on the first step)
  std::shared_ptr<DefiningFunction> rho_next =
      pushforward_defining(state.rho, corr.G, /*extended=*/state.j == 0);
  auto new_mask = rho_next->mask_on(sp);

  Structure A_next = pushforward_structure(state.A, corr.F, corr.G, new_mask);

  // composition bookkeeping
  MapField Ft_next = corr.F.compose_after(state.Ftilde);
  MapField Gt_next = state.Gtilde.compose_after(corr.G);

  // ledger for step j+1
  LedgerRow row;
  row.j = state.j + 1;
  state.log_t *= p.d;  // t_{j+1} = t_j^d, exact in log space
  row.t = state.t();
  row.a = zygmund_norm(A_next.A, p.s, NormMethod::FiniteDifference, &ops.offsets).total;
  row.L = zygmund_norm(A_next.A, p.r, NormMethod::FiniteDifference, &ops.offsets).total;
  A_next.norm_s = row.a;
  A_next.norm_r = row.L;
  row.defect = integrability_defect(A_next).sup;

  LeviReport lr = levi_min(*rho_next, 200);
  row.levi_min = lr.lambda_min;
  if (!(lr.lambda_min > 0)) {
    fail("iterate_once: strict pseudoconvexity lost (levi_min <= 0); ledger so far:\n" +
         ledger_text(state.ledger));
  }

  // Low/High monitors against the frozen constant
  {
    const LedgerRow& prev = state.ledger.back();
    double Cr = p.cr_star > 0 ? p.cr_star : 1.0;
    double low_rhs = Cr * (std::pow(t_j, p.r - p.s - 0.5) * prev.L +
                           std::pow(t_j, -0.5) * prev.a * prev.a);
    double high_rhs = Cr * std::pow(t_j, -0.5) * prev.L;
    row.low_ok = row.a <= low_rhs;
    row.high_ok = row.L <= high_rhs;
  }

  // Cauchy increment |Ftilde_{j+1} - Ftilde_j| in the (ell + 1/2)-estimator
  {
    GridFunction diff(sp, Rank::Covector);
    for (std::size_t k = 0; k < sp.node_count(); ++k) {
      Vec4 x = sp.coord(sp.unflat(k));
      C2 a = Ft_next.f(x), b = state.Ftilde.f(x);
      diff.at(k, 0) = a[0] - b[0];
      diff.at(k, 1) = a[1] - b[1];
    }
    row.cauchy_increment =
        zygmund_norm(diff, p.ell + 0.5, NormMethod::FiniteDifference, &ops.offsets)
            .total;
  }

  state.j += 1;
  state.A = std::move(A_next);
  state.rho = std::move(rho_next);
  state.Ftilde = std::move(Ft_next);
  state.Gtilde = std::move(Gt_next);
  state.rho_drift_c2 = c2_distance(*state.rho, *state.rho0);
  state.ledger.push_back(row);
  return state;
}

RunResult run_solver(Structure A0, std::shared_ptr<DefiningFunction> rho0,
                     const Parameters& p, const SolverOps& ops, int max_steps,
                     double target_sup) {
  RunResult res;
  res.params = p;
  IterationState st = make_initial_state(std::move(A0), std::move(rho0), p, ops);

  // entry hypothesis (the Prop 8.1 realization of |A|_r < delta_r)
  double a0 = st.ledger[0].a, L0 = st.ledger[0].L;
  if (a0 > std::pow(p.t0, p.alpha)) {
    std::ostringstream os;
    os << "run_solver: |A0|_s = " << a0 << " exceeds t0^alpha = "
       << std::pow(p.t0, p.alpha);
    fail(os.str());
  }
  if (L0 > std::pow(p.t0, -p.gamma)) {
    std::ostringstream os;
    os << "run_solver: |A0|_r = " << L0 << " exceeds t0^-gamma = "
       << std::pow(p.t0, -p.gamma);
    fail(os.str());
  }

  int increases = 0;
  for (int step = 0; step < max_steps; ++step) {
    if (st.A.sup() < target_sup) {
      res.converged = true;
      res.stop_reason = "target reached";
      break;
    }
    double a_prev = st.ledger.back().a;
    st = iterate_once(std::move(st), p, ops);
    double a_new = st.ledger.back().a;
    res.cauchy_increments.push_back(st.ledger.back().cauchy_increment);
    if (a_new > a_prev) {
      if (++increases >= 2) {
        res.stop_reason = "diverged: a_j increased twice consecutively";
        res.state = std::move(st);
        return res;
      }
    } else {
      increases = 0;
    }
  }
  if (res.stop_reason.empty()) {
    res.converged = st.A.sup() < target_sup;
    res.stop_reason = res.converged ? "target reached" : "max steps";
  }

  // Cauchy ratio test from the second increment on
  for (std::size_t i = 2; i < res.cauchy_increments.size(); ++i)
    if (res.cauchy_increments[i] > res.cauchy_increments[i - 1])
      res.cauchy_summable = false;
  res.jacobian_dev = st.Ftilde.sup_Df();
  res.state = std::move(st);
  return res;
}

MapField oracle_phi_family(const GridSpec& sp, int which, double amp) {
  // closed-form antiholomorphic polynomial perturbations with derivatives
  if (which == 0) {
    auto f = [amp](const Vec4& x) -> C2 {
      C2 z = to_complex(x);
      return {amp * std::conj(z[1]) * std::conj(z[1]), cplx(0, 0)};
    };
    auto dz = [](const Vec4&) -> C2 { return {}; };
    auto db1 = [](const Vec4&) -> C2 { return {}; };
    auto db2 = [amp](const Vec4& x) -> C2 {
      C2 z = to_complex(x);
      return {amp * 2.0 * std::conj(z[1]), cplx(0, 0)};
    };
    return MapField::from_closed_form(sp, f, dz, dz, db1, db2);
  }
  if (which == 1) {
    // (zbar2^2, zbar1 zbar2)
    auto f = [amp](const Vec4& x) -> C2 {
      C2 z = to_complex(x);
      return {amp * std::conj(z[1]) * std::conj(z[1]),
              amp * std::conj(z[0]) * std::conj(z[1])};
    };
    auto dz = [](const Vec4&) -> C2 { return {}; };
    auto db1 = [amp](const Vec4& x) -> C2 {
      C2 z = to_complex(x);
      return {cplx(0, 0), amp * std::conj(z[1])};
    };
    auto db2 = [amp](const Vec4& x) -> C2 {
      C2 z = to_complex(x);
      return {amp * 2.0 * std::conj(z[1]), amp * std::conj(z[0])};
    };
    return MapField::from_closed_form(sp, f, dz, dz, db1, db2);
  }
  // trigonometric family
  auto f = [amp](const Vec4& x) -> C2 {
    C2 z = to_complex(x);
    cplx zb1 = std::conj(z[0]), zb2 = std::conj(z[1]);
    return {amp * std::sin(zb2), amp * 0.5 * (std::cos(zb1) - 1.0)};
  };
  auto dz = [](const Vec4&) -> C2 { return {}; };
  auto db1 = [amp](const Vec4& x) -> C2 {
    C2 z = to_complex(x);
    return {cplx(0, 0), amp * -0.5 * std::sin(std::conj(z[0]))};
  };
  auto db2 = [amp](const Vec4& x) -> C2 {
    C2 z = to_complex(x);
    return {amp * std::cos(std::conj(z[1])), cplx(0, 0)};
  };
  return MapField::from_closed_form(sp, f, dz, dz, db1, db2);
}

StabilityBudget calibrate_budget(std::shared_ptr<DefiningFunction> rho0,
                                 const GridSpec& sp, const Parameters& p,
                                 const SolverOps& ops, double t_cal) {
  StabilityBudget b;
  auto mask = rho0->mask_on(sp);

  double C2c = 0, Csc = 0;
  Structure A_for_iter;
  double a0_iter = 0, L0_iter = 0;
  for (int which = 0; which < 2; ++which) {
    for (double amp : {0.01, 0.02}) {
      MapField phi = oracle_phi_family(sp, which, amp);
      Structure A = oracle_structure(phi, sp, mask);
      double a_s =
          zygmund_norm(A.A, p.s, NormMethod::FiniteDifference, &ops.offsets).total;
      CorrectionResult corr = correction_step(A, rho0, t_cal, ops);
      double fs1 = zygmund_norm(corr.F.displacement(), p.s + 1.0,
                                NormMethod::FiniteDifference, &ops.offsets).total;
      C2c = std::max(C2c, corr.f_norm2 / a_s);
      Csc = std::max(Csc, fs1 * std::sqrt(t_cal) / a_s);
      if (which == 1 && amp == 0.02) {
        A_for_iter = A;
        a0_iter = a_s;
        L0_iter =
            zygmund_norm(A.A, p.r, NormMethod::FiniteDifference, &ops.offsets).total;
      }
    }
  }
  b.C2_star = 1.25 * C2c;
  b.Cs_star = 1.25 * Csc;
  b.Css_star = 1.1 * std::sqrt(8.0 * kNC) * b.C2_star;

  // one calibration iterate pins the Low/High constant
  {
    Parameters pc = p;
    pc.t0 = t_cal;
    IterationState st = make_initial_state(A_for_iter, rho0, pc, ops);
    IterationState st1 = iterate_once(std::move(st), pc, ops);
    double a1 = st1.ledger.back().a, L1 = st1.ledger.back().L;
    double low_rhs = std::pow(t_cal, p.r - p.s - 0.5) * L0_iter +
                     std::pow(t_cal, -0.5) * a0_iter * a0_iter;
    double cand_low = a1 / low_rhs;
    double cand_high = L1 * std::sqrt(t_cal) / L0_iter;
    b.Cr_star = 1.25 * std::max({cand_low, cand_high, 0.05});
  }

  // Levi perturbation family (the Lemma 7.2 content, fitted)
  {
    double l0 = levi_min(*rho0, 200).lambda_min;
    double C_levi = 0.1;
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> uni(-0.6, 0.6);
    for (int i = 0; i < 10; ++i) {
      Vec4 x0 = {uni(rng), uni(rng), uni(rng), uni(rng)};
      double w = 0.5;
      double amp = 0.02;
      auto f = [rho0, x0, w, amp](const Vec4& x) {
        Vec4 d = x - x0;
        return rho0->rho(x) + amp * std::exp(-dot(d, d) / (w * w));
      };
      auto pert =
          std::make_shared<ClosedFormRho>(rho0->box(), f, rho0->interior_seed());
      double dist = c2_distance(*pert, *rho0);
      double l1 = levi_min(*pert, 200).lambda_min;
      if (dist > 0) C_levi = std::max(C_levi, (l0 - l1) / dist);
    }
    b.eps_D0 = 0.5 * l0 / C_levi;
  }

  // composition budget delta(rho0, eps, 2): chain four maps with
  // |f_i|_2 <= delta/(i+1)^2 and fit the realized C2 drift per unit budget
  {
    double delta_probe = 0.05;
    MapField Gt = MapField::identity(sp);
    double sum_caps = 0;
    for (int i = 0; i < 4; ++i) {
      double cap = delta_probe / double((i + 1) * (i + 1));
      sum_caps += cap;
      double ph = 0.7 + 0.13 * i;
      auto f = [cap, ph](const Vec4& x) -> C2 {
        C2 z = to_complex(x);
        cplx v = 0.5 * cap * std::sin(ph * x[0] + 0.3 * ph) *
                 std::exp(cplx(0, 1) * (0.4 * x[2]));
        return {v, 0.1 * cap * std::cos(ph * x[3]) * z[0]};
      };
      MapField Fi = MapField::from_closed_form(sp, f);
      MapField Gi = Fi.inverse();
      Gt = Gt.compose_after(Gi);
    }
    auto moved = std::make_shared<TransportedRho>(
        std::shared_ptr<const DefiningFunction>(rho0), Gt, TransportedRho::Mode::Raw);
    double drift = c2_distance(*moved, *rho0);
    double C_comp = std::max(0.2, drift / sum_caps);
    b.delta_rho0 = b.eps_D0 / (2.0 * C_comp * 1.645);
  }
  return b;
}

}  // namespace acs
