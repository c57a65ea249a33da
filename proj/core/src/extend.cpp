#include "acs/extend.hpp"

#include <random>
#include <sstream>

#include "acs/interp.hpp"
#include "acs/stencil.hpp"

namespace acs {

namespace {
const double kW[3] = {6.0, -8.0, 3.0};  // degree-2 reproduction weights

double smoothstep5(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}
}  // namespace

ExtensionOperator::ExtensionOperator(std::shared_ptr<const DefiningFunction> rho,
                                     ExtensionConfig cfg)
    : rho_(std::move(rho)), cfg_(cfg) {}

ExtensionOperator::Collar ExtensionOperator::collar_at(const Vec4& x) const {
  Collar c;
  double v = rho_->rho(x);
  if (v <= 0) return c;
  c.exterior = true;
  Vec4 y = x;
  for (int it = 0; it < 60; ++it) {
    double r = rho_->rho(y);
    if (std::abs(r) < 1e-12) break;
    Vec4 g = rho_->grad(y);
    double g2 = dot(g, g);
    require(g2 > 1e-16, "extend: gradient vanished during boundary projection");
    y = y - (r / g2) * g;
  }
  c.base = y;
  Vec4 d = x - y;
  c.s = norm2(d);
  if (c.s < 1e-14) {
    Vec4 g = rho_->grad(y);
    c.nu = (1.0 / norm2(g)) * g;
    c.s = 0;
  } else {
    c.nu = (1.0 / c.s) * d;
  }
  return c;
}

double ExtensionOperator::cutoff(double s) const {
  return 1.0 - smoothstep5((s - cfg_.delta1) / (cfg_.delta2 - cfg_.delta1));
}

cplx ExtensionOperator::eval(const GridFunction& u, int comp, const Vec4& x) const {
  if (rho_->rho(x) <= 0) return interp_masked(u, comp, x, cfg_.interp_degree);
  Collar c = collar_at(x);
  if (c.s >= cfg_.delta2) return {0, 0};
  double xi = cutoff(c.s);
  cplx acc(0, 0);
  for (int k = 1; k <= 3; ++k) {
    Vec4 p = c.base - (k * c.s) * c.nu;
    if (rho_->rho(p) > 1e-9) {
      std::ostringstream os;
      os << "extend: node at normal distance " << c.s
         << " needs reflection reach " << 3 * c.s
         << " which leaves the domain; enlarge the reach or shrink delta2";
      fail(os.str());
    }
    acc += kW[k - 1] * interp_masked(u, comp, p, cfg_.interp_degree);
  }
  return xi * acc;
}

cplx ExtensionOperator::eval_closed(const std::function<cplx(const Vec4&)>& u,
                                    const Vec4& x) const {
  if (rho_->rho(x) <= 0) return u(x);
  Collar c = collar_at(x);
  if (c.s >= cfg_.delta2) return {0, 0};
  double xi = cutoff(c.s);
  cplx acc(0, 0);
  for (int k = 1; k <= 3; ++k) {
    Vec4 p = c.base - (k * c.s) * c.nu;
    require(rho_->rho(p) <= 1e-9, "extend: reflection reach leaves the domain");
    acc += kW[k - 1] * u(p);
  }
  return xi * acc;
}

GridFunction ExtensionOperator::extend_grid(const GridFunction& u) const {
  const GridSpec& sp = u.spec();
  GridFunction out(sp, u.rank());
  const int nc = u.mult();
  parallel_for(u.nodes(), [&](std::size_t k) {
    Vec4 x = sp.coord(sp.unflat(k));
    if (u.in_mask(k) && rho_->rho(x) <= 0) {
      for (int c = 0; c < nc; ++c) out.at(k, c) = u.at(k, c);  // exact on D
      return;
    }
    for (int c = 0; c < nc; ++c) out.at(k, c) = eval(u, c, x);
  });
  return out;
}

GridFunction extend(const GridFunction& u, std::shared_ptr<const DefiningFunction> rho,
                    ExtensionConfig cfg) {
  ExtensionOperator E(std::move(rho), cfg);
  return E.extend_grid(u);
}

namespace {

// order-a norm estimate on a scattered shell sample: sup plus sampled
// second differences |T(x+2y)+T(x)-2T(x+y)|/|y|^a over in-shell triples
double shell_norm(const std::function<cplx(const Vec4&)>& T,
                  const std::function<bool(const Vec4&)>& in_shell,
                  const std::vector<Vec4>& pts, double eta, double a,
                  std::uint64_t seed) {
  double sup = 0;
  for (const auto& p : pts) sup = std::max(sup, std::abs(T(p)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  double semi = 0;
  double ylen = eta / 6.0;
  for (const auto& p : pts) {
    for (int dir = 0; dir < 3; ++dir) {
      Vec4 y;
      double n2 = 0;
      for (int i = 0; i < kND; ++i) { y[i] = gauss(rng); n2 += y[i] * y[i]; }
      y = (ylen / std::sqrt(n2)) * y;
      Vec4 p1 = p + y, p2 = p + 2.0 * y;
      if (!in_shell(p1) || !in_shell(p2)) continue;
      double v = std::abs(T(p2) + T(p) - 2.0 * T(p1)) / std::pow(ylen, a);
      semi = std::max(semi, v);
    }
  }
  return sup + semi;
}

std::vector<Vec4> shell_points(const ExtensionOperator& E, double eta, int count,
                               std::uint64_t seed) {
  // boundary sample pushed outward by uniform normal distances in (0, eta)
  auto bpts = boundary_sample(E.domain(), count, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> uni(0.05, 0.95);
  std::vector<Vec4> out;
  out.reserve(bpts.size());
  for (const auto& b : bpts) {
    Vec4 g = E.domain().grad(b);
    Vec4 nu = (1.0 / norm2(g)) * g;
    double s = uni(rng) * eta;
    Vec4 p = b + s * nu;
    if (E.domain().rho(p) > 0 && E.domain().box().contains(p)) out.push_back(p);
  }
  return out;
}

CommutatorReport probe_impl(const std::function<cplx(const Vec4&)>& Eu_eval,
                            const std::function<cplx(const Vec4&)>& Edbar_eval_1,
                            const std::function<cplx(const Vec4&)>& Edbar_eval_2,
                            const ExtensionOperator& E, const std::vector<double>& etas,
                            double a, double interior_sup) {
  // commutator components: [dbar,E]u_alpha = d_alphabar(Eu) - E(d_alphabar u)
  const double hl = 2.5e-3;
  auto comm = [&](const Vec4& x) -> cplx {
    double best = 0;
    cplx worst(0, 0);
    for (int al = 0; al < kNC; ++al) {
      Vec4 xp = x, xm = x, yp = x, ym = x;
      xp[2 * al] += hl;
      xm[2 * al] -= hl;
      yp[2 * al + 1] += hl;
      ym[2 * al + 1] -= hl;
      cplx dx = (Eu_eval(xp) - Eu_eval(xm)) / (2 * hl);
      cplx dy = (Eu_eval(yp) - Eu_eval(ym)) / (2 * hl);
      cplx dbarEu = 0.5 * (dx + cplx(0, 1) * dy);
      cplx Edbar = (al == 0) ? Edbar_eval_1(x) : Edbar_eval_2(x);
      cplx v = dbarEu - Edbar;
      if (std::abs(v) > best) { best = std::abs(v); worst = v; }
    }
    return worst;
  };

  CommutatorReport rep;
  rep.interior_sup = interior_sup;
  rep.etas = etas;
  for (std::size_t ei = 0; ei < etas.size(); ++ei) {
    double eta = etas[ei];
    auto pts = shell_points(E, eta, 160, 4242 + ei);
    require(!pts.empty(), "commutator_probe: shell empty at requested eta");
    auto in_shell = [&](const Vec4& p) {
      if (!E.domain().box().contains(p)) return false;
      if (E.domain().rho(p) <= 0) return false;
      auto c = E.collar_at(p);
      return c.s > 0 && c.s < eta;
    };
    rep.shell_norms.push_back(shell_norm(comm, in_shell, pts, eta, a, 99 + ei));
  }
  rep.fitted_exponent = fit_loglog_slope(rep.etas, rep.shell_norms);
  return rep;
}

}  // namespace

CommutatorReport commutator_probe(const GridFunction& u,
                                  std::shared_ptr<const DefiningFunction> rho,
                                  const std::vector<double>& etas, double a,
                                  ExtensionConfig cfg) {
  require(u.rank() == Rank::Scalar, "commutator_probe: scalar fields (componentwise)");
  ExtensionOperator E(rho, cfg);
  GridFunction Eu = E.extend_grid(u);
  GridFunction du1 = wirtinger_derivative(u, 0, true);
  GridFunction du2 = wirtinger_derivative(u, 1, true);
  GridFunction dEu1 = wirtinger_derivative(Eu, 0, true);
  GridFunction dEu2 = wirtinger_derivative(Eu, 1, true);

  // interior check: on the D-mask the commutator is stencil-sized
  double isup = 0;
  for (std::size_t k = 0; k < u.nodes(); ++k) {
    if (!u.in_mask(k)) continue;
    isup = std::max(isup, std::abs(dEu1.at(k) - du1.at(k)));
    isup = std::max(isup, std::abs(dEu2.at(k) - du2.at(k)));
  }

  auto Eu_eval = [&](const Vec4& x) { return E.eval(u, 0, x); };
  auto Ed1 = [&](const Vec4& x) { return E.eval(du1, 0, x); };
  auto Ed2 = [&](const Vec4& x) { return E.eval(du2, 0, x); };
  return probe_impl(Eu_eval, Ed1, Ed2, E, etas, a, isup);
}

CommutatorReport commutator_probe_closed(
    const std::function<cplx(const Vec4&)>& u,
    const std::array<std::function<cplx(const Vec4&)>, kNC>& dbar_u,
    std::shared_ptr<const DefiningFunction> rho, const std::vector<double>& etas,
    double a, ExtensionConfig cfg) {
  ExtensionOperator E(rho, cfg);
  auto Eu_eval = [&](const Vec4& x) { return E.eval_closed(u, x); };
  auto Ed1 = [&](const Vec4& x) { return E.eval_closed(dbar_u[0], x); };
  auto Ed2 = [&](const Vec4& x) { return E.eval_closed(dbar_u[1], x); };
  return probe_impl(Eu_eval, Ed1, Ed2, E, etas, a, 0.0);
}

}  // namespace acs
