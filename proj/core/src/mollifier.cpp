#include "acs/mollifier.hpp"

#include <Eigen/Dense>
#include <sstream>

#include "acs/interp.hpp"

#include <nlohmann/json.hpp>

namespace acs {

namespace {

// Gauss-Legendre nodes/weights on [-1,1] (Newton on Legendre polynomials).
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (t * p1 - p0) / (t * t - 1);
      double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    double p0 = 1, p1 = t;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * (t * p1 - p0) / (t * t - 1);
    x[i] = t;
    w[i] = 2.0 / ((1 - t * t) * dp * dp);
  }
}

// Product quadrature on the unit ball of R^4, exact for radial-polynomial
// integrands times monomials up to the configured degrees:
//   w = r * (cos a, sin a cos b, sin a sin b cos p, sin a sin b sin p)
//   dV = r^3 dr * sin^2 a da * sin b db * dp
// Every angular factor is integrated by a symmetric rule, so all odd-moment
// sums vanish identically and even moments factor into radial x angular.
void ball_rule(int radial_deg, int angular_deg, std::vector<Vec4>& nodes,
               std::vector<double>& weights) {
  int nr = std::max(8, radial_deg / 2 + 2);   // radial Gauss on [0,1]
  int na = std::max(4, angular_deg + 2);      // theta1 via Chebyshev-U
  int nb = std::max(4, angular_deg / 2 + 2);  // theta2 via Gauss-Legendre in cos
  int np = std::max(6, angular_deg + 2);      // phi uniform
  if (np % 2) ++np;                           // keep the rule antipodal

  std::vector<double> rx, rw;
  gauss_legendre(nr, rx, rw);
  std::vector<double> bx, bw;
  gauss_legendre(nb, bx, bw);

  nodes.clear();
  weights.clear();
  for (int ir = 0; ir < nr; ++ir) {
    double r = 0.5 * (rx[ir] + 1.0);
    double wr = 0.5 * rw[ir] * r * r * r;
    for (int ia = 1; ia <= na; ++ia) {
      // Chebyshev 2nd kind: t = cos(a), weight pi/(na+1) * sin^2
      double a = M_PI * ia / (na + 1);
      double wa = M_PI / (na + 1) * std::sin(a) * std::sin(a);
      double ca = std::cos(a), sa = std::sin(a);
      for (int ib = 0; ib < nb; ++ib) {
        double cb = bx[ib], sb = std::sqrt(std::max(0.0, 1 - cb * cb));
        double wb = bw[ib];
        for (int ip = 0; ip < np; ++ip) {
          double p = 2.0 * M_PI * ip / np;
          double wp = 2.0 * M_PI / np;
          Vec4 w4 = {r * ca, r * sa * cb, r * sa * sb * std::cos(p),
                     r * sa * sb * std::sin(p)};
          nodes.push_back(w4);
          weights.push_back(wr * wa * wb * wp);
        }
      }
    }
  }
}

double bump(double s2) {  // s2 = |y|^2
  if (s2 >= 1.0) return 0.0;
  double t = 1.0 - s2;
  double t2 = t * t;
  return t2 * t2;
}

// Distinct even moment patterns (sorted descending) with 2 <= |I| <= L.
std::vector<Idx4> even_patterns(int L) {
  std::vector<Idx4> pats;
  for (int i0 = L; i0 >= 0; i0 -= 2)
    for (int i1 = i0; i1 >= 0; i1 -= 2)
      for (int i2 = i1; i2 >= 0; i2 -= 2)
        for (int i3 = i2; i3 >= 0; i3 -= 2) {
          int s = i0 + i1 + i2 + i3;
          if (s >= 2 && s <= L) pats.push_back({i0, i1, i2, i3});
        }
  return pats;
}

}  // namespace

double Mollifier::chi(const Vec4& y) const {
  double s2 = dot(y, y);
  if (s2 >= 1.0) return 0.0;
  double q = 0, p = 1;
  for (double c : q_coeffs) {
    q += c * p;
    p *= s2;
  }
  return q * bump(s2);
}

double Mollifier::moment(const Idx4& I) const {
  double s = 0;
  for (std::size_t k = 0; k < quad_nodes.size(); ++k) {
    const Vec4& w = quad_nodes[k];
    double m = 1;
    for (int a = 0; a < kND; ++a)
      for (int e = 0; e < I[a]; ++e) m *= w[a];
    s += quad_weights[k] * chi_at_nodes[k] * m;
  }
  return s;
}

std::string Mollifier::to_json() const {
  nlohmann::ordered_json j;
  j["L"] = L;
  j["q_coeffs"] = q_coeffs;
  j["bump"] = "(1-|y|^2)^4";
  return j.dump(2);
}

Mollifier Mollifier::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  Mollifier m = build_mollifier(j.at("L").get<int>());
  // coefficients are re-derived; verify the stored ones agree
  auto qc = j.at("q_coeffs").get<std::vector<double>>();
  require(qc.size() == m.q_coeffs.size(), "Mollifier::from_json: order mismatch");
  return m;
}

Mollifier build_mollifier(int L) {
  require(L >= 1 && L <= 8, "build_mollifier: L must be in [1,8]");
  Mollifier m;
  m.L = L;
  int J = L / 2;  // q degree

  // radial degree: polynomial part 2J + bump 8 + |I| <= L + the r^3 measure;
  // angular degree: the moments themselves
  ball_rule(2 * J + 8 + L + 4, L, m.quad_nodes, m.quad_weights);

  // Radial conditions: R_m = int r^{2m} q(r^2) bump(r) r^3 dr-type sums taken
  // on the quadrature through the representative moment w1^{2m}; angular
  // factors are nonzero so killing these kills every |I| = 2m pattern.
  int nc = J + 1;
  Eigen::MatrixXd A(nc, nc);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nc);
  rhs(0) = 1.0;
  for (int mrow = 0; mrow <= J; ++mrow) {
    for (int j = 0; j <= J; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < m.quad_nodes.size(); ++k) {
        const Vec4& w = m.quad_nodes[k];
        double s2 = dot(w, w);
        double v = m.quad_weights[k] * bump(s2) * std::pow(s2, j);
        for (int e = 0; e < 2 * mrow; ++e) v *= w[0];
        s += v;
      }
      A(mrow, j) = s;
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  require(lu.isInvertible(), "build_mollifier: moment system singular at this quadrature");
  Eigen::VectorXd c = lu.solve(rhs);
  m.q_coeffs.assign(c.data(), c.data() + nc);

  m.chi_at_nodes.resize(m.quad_nodes.size());
  for (std::size_t k = 0; k < m.quad_nodes.size(); ++k)
    m.chi_at_nodes[k] = m.chi(m.quad_nodes[k]);

  // verify every pattern up to L on the build quadrature
  for (const Idx4& p : even_patterns(L)) {
    double v = std::abs(m.moment(p));
    if (v > 1e-10) {
      std::ostringstream os;
      os << "build_mollifier: moment (" << p[0] << p[1] << p[2] << p[3]
         << ") = " << v << " exceeds 1e-10";
      fail(os.str());
    }
  }
  require(std::abs(m.moment({0, 0, 0, 0}) - 1.0) < 1e-10,
          "build_mollifier: normalization failed");
  return m;
}

const Mollifier& plain_mollifier() {
  static Mollifier m = build_mollifier(1);
  return m;
}

GridFunction smooth_field(const GridFunction& u, double t, const Mollifier& m,
                          int interp_degree, bool compact_support,
                          const std::vector<std::uint8_t>* eval_mask) {
  require(t > 0, "smooth_field: t must be positive");
  const GridSpec& sp = u.spec();
  GridFunction out(sp, u.rank());
  const int nc = u.mult();

  if (compact_support) {
    // support bounding box of u (plus t) limits where the output is nonzero
    Vec4 lo = sp.upper, hi = sp.lower;
    bool any = false;
    for (std::size_t k = 0; k < u.nodes(); ++k) {
      if (!u.in_mask(k)) continue;
      bool nz = false;
      for (int c = 0; c < nc; ++c)
        if (std::abs(u.at(k, c)) > 0) { nz = true; break; }
      if (!nz) continue;
      any = true;
      Vec4 x = sp.coord(sp.unflat(k));
      for (int a = 0; a < kND; ++a) {
        lo[a] = std::min(lo[a], x[a]);
        hi[a] = std::max(hi[a], x[a]);
      }
    }
    if (!any) return out;
    parallel_for(u.nodes(), [&](std::size_t k) {
      if (eval_mask && !(*eval_mask)[k]) return;
      Vec4 x = sp.coord(sp.unflat(k));
      for (int a = 0; a < kND; ++a)
        if (x[a] < lo[a] - t || x[a] > hi[a] + t) return;  // stays zero
      std::vector<cplx> acc(nc, cplx(0, 0));
      for (std::size_t q = 0; q < m.quad_nodes.size(); ++q) {
        double wchi = m.quad_weights[q] * m.chi_at_nodes[q];
        if (wchi == 0.0) continue;
        Vec4 y = x - t * m.quad_nodes[q];
        for (int c = 0; c < nc; ++c)
          acc[c] += wchi * interp_lagrange(u, c, y, interp_degree, /*zero_outside=*/true);
      }
      for (int c = 0; c < nc; ++c) out.at(k, c) = acc[c];
    });
    return out;
  }

  if (!u.has_mask()) {
    // box-wide data: evaluate everywhere with clamped reads at the box edge
    parallel_for(u.nodes(), [&](std::size_t k) {
      if (eval_mask && !(*eval_mask)[k]) return;
      Vec4 x = sp.coord(sp.unflat(k));
      std::vector<cplx> acc(nc, cplx(0, 0));
      for (std::size_t q = 0; q < m.quad_nodes.size(); ++q) {
        double wchi = m.quad_weights[q] * m.chi_at_nodes[q];
        if (wchi == 0.0) continue;
        Vec4 y = x - t * m.quad_nodes[q];
        for (int c = 0; c < nc; ++c)
          acc[c] += wchi * interp_lagrange(u, c, y, interp_degree, false);
      }
      for (int c = 0; c < nc; ++c) out.at(k, c) = acc[c];
    });
    return out;
  }

  // masked path: evaluate where the sampling cube stays in-mask
  std::vector<std::uint8_t> outmask(u.nodes(), 0);
  parallel_for(u.nodes(), [&](std::size_t k) {
    if (eval_mask && !(*eval_mask)[k]) return;
    Idx4 i = sp.unflat(k);
    Vec4 x = sp.coord(i);
    Idx4 lo, hi;
    for (int a = 0; a < kND; ++a) {
      double pad = t + (interp_degree / 2 + 1) * sp.h(a);
      lo[a] = int(std::floor((x[a] - pad - sp.lower[a]) / sp.h(a)));
      hi[a] = int(std::ceil((x[a] + pad - sp.lower[a]) / sp.h(a)));
      if (lo[a] < 0 || hi[a] > sp.npts[a] - 1) return;
    }
    Idx4 j;
    for (j[0] = lo[0]; j[0] <= hi[0]; ++j[0])
      for (j[1] = lo[1]; j[1] <= hi[1]; ++j[1])
        for (j[2] = lo[2]; j[2] <= hi[2]; ++j[2])
          for (j[3] = lo[3]; j[3] <= hi[3]; ++j[3])
            if (!u.in_mask(sp.flat(j))) return;
    outmask[k] = 1;
    std::vector<cplx> acc(nc, cplx(0, 0));
    for (std::size_t q = 0; q < m.quad_nodes.size(); ++q) {
      double wchi = m.quad_weights[q] * m.chi_at_nodes[q];
      if (wchi == 0.0) continue;
      Vec4 y = x - t * m.quad_nodes[q];
      for (int c = 0; c < nc; ++c)
        acc[c] += wchi * interp_lagrange(u, c, y, interp_degree, false);
    }
    for (int c = 0; c < nc; ++c) out.at(k, c) = acc[c];
  });
  out.set_mask(std::move(outmask));
  out.seal_mask();
  return out;
}

SmoothResult smooth(const GridFunction& u, double t, const Mollifier& m,
                    double t_max, int interp_degree, bool compact_support) {
  require(t > 0, "smooth: t must be positive");
  require(t <= t_max, "smooth: t too large for the box margin");
  SmoothResult r;
  r.underresolved = t < 2.0 * u.spec().h_min();
  r.field = smooth_field(u, t, m, interp_degree, compact_support, nullptr);
  return r;
}

}  // namespace acs
