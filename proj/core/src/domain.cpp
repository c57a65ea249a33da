#include "acs/domain.hpp"

#include <random>
#include <sstream>

#include "acs/interp.hpp"

namespace acs {

Vec4 DefiningFunction::grad(const Vec4& x) const {
  Vec4 g;
  double h = fd_step_;
  for (int a = 0; a < kND; ++a) {
    Vec4 xp = x, xm = x;
    xp[a] += h;
    xm[a] -= h;
    g[a] = (rho(xp) - rho(xm)) / (2 * h);
  }
  return g;
}

void DefiningFunction::hessian(const Vec4& x, double H[kND][kND]) const {
  double h = fd_step_;
  double f0 = rho(x);
  for (int a = 0; a < kND; ++a) {
    Vec4 xp = x, xm = x;
    xp[a] += h;
    xm[a] -= h;
    H[a][a] = (rho(xp) - 2 * f0 + rho(xm)) / (h * h);
    for (int b = a + 1; b < kND; ++b) {
      Vec4 xpp = x, xpm = x, xmp = x, xmm = x;
      xpp[a] += h; xpp[b] += h;
      xpm[a] += h; xpm[b] -= h;
      xmp[a] -= h; xmp[b] += h;
      xmm[a] -= h; xmm[b] -= h;
      H[a][b] = H[b][a] = (rho(xpp) - rho(xpm) - rho(xmp) + rho(xmm)) / (4 * h * h);
    }
  }
}

C2 DefiningFunction::dz(const Vec4& x) const {
  Vec4 g = grad(x);
  return {0.5 * cplx(g[0], -g[1]), 0.5 * cplx(g[2], -g[3])};
}

void DefiningFunction::complex_hessian(const Vec4& x, cplx H[kNC][kNC], bool check) const {
  double R[kND][kND];
  hessian(x, R);
  for (int a = 0; a < kNC; ++a)
    for (int b = 0; b < kNC; ++b) {
      int xa = 2 * a, ya = 2 * a + 1, xb = 2 * b, yb = 2 * b + 1;
      H[a][b] = 0.25 * cplx(R[xa][xb] + R[ya][yb], R[xa][yb] - R[ya][xb]);
    }
  if (check) {
    double asym = std::abs(H[0][1] - std::conj(H[1][0])) +
                  std::abs(H[0][0].imag()) + std::abs(H[1][1].imag());
    double scale = std::abs(H[0][0]) + std::abs(H[1][1]) + 1.0;
    require(asym <= 1e-4 * scale,
            "complex_hessian: non-Hermitian numerical Hessian beyond tolerance");
  }
  // symmetrize
  cplx off = 0.5 * (H[0][1] + std::conj(H[1][0]));
  H[0][1] = off;
  H[1][0] = std::conj(off);
  H[0][0] = H[0][0].real();
  H[1][1] = H[1][1].real();
}

void DefiningFunction::holo_hessian(const Vec4& x, cplx B[kNC][kNC]) const {
  double R[kND][kND];
  hessian(x, R);
  for (int a = 0; a < kNC; ++a)
    for (int b = 0; b < kNC; ++b) {
      int xa = 2 * a, ya = 2 * a + 1, xb = 2 * b, yb = 2 * b + 1;
      // d/dz_a d/dz_b = 1/4 (dxa - i dya)(dxb - i dyb)
      B[a][b] = 0.25 * cplx(R[xa][xb] - R[ya][yb], -(R[xa][yb] + R[ya][xb]));
    }
}

std::vector<std::uint8_t> DefiningFunction::mask_on(const GridSpec& spec) const {
  std::vector<std::uint8_t> m(spec.node_count(), 0);
  for (std::size_t k = 0; k < m.size(); ++k)
    m[k] = rho(spec.coord(spec.unflat(k))) <= 0 ? 1 : 0;
  return m;
}

void DefiningFunction::finalize(const Vec4& seed_interior) {
  seed_ = seed_interior;
  require(rho(seed_) < 0, "DefiningFunction: seed point is not inside {rho<0}");
  auto pts = boundary_sample(*this, 200);
  double th = 1e300;
  for (const auto& p : pts) {
    require(norm2(grad(p)) > 1e-8,
            "DefiningFunction: gradient vanishes on the zero set");
    for (int a = 0; a < kND; ++a)
      th = std::min(th, std::min(p[a] - box_.lower[a], box_.upper[a] - p[a]));
  }
  require(th > 0, "DefiningFunction: {rho<0} touches the box boundary");
  theta0_ = th;
  // sampled C2 norm over the box
  GridSpec coarse(box_.lower, box_.upper, {7, 7, 7, 7});
  double m = 0;
  for (std::size_t k = 0; k < coarse.node_count(); ++k) {
    Vec4 x = coarse.coord(coarse.unflat(k));
    m = std::max(m, std::abs(rho(x)));
    Vec4 g = grad(x);
    for (int a = 0; a < kND; ++a) m = std::max(m, std::abs(g[a]));
    double H[kND][kND];
    hessian(x, H);
    for (int a = 0; a < kND; ++a)
      for (int b = 0; b < kND; ++b) m = std::max(m, std::abs(H[a][b]));
  }
  c2norm_ = m;
}

ClosedFormRho::ClosedFormRho(GridSpec box, FEval f, const Vec4& seed_interior,
                             GEval g, HEval h)
    : f_(std::move(f)), g_(std::move(g)), h_(std::move(h)) {
  box_ = box;
  finalize(seed_interior);
}

Vec4 ClosedFormRho::grad(const Vec4& x) const {
  if (g_) return g_(x);
  return DefiningFunction::grad(x);
}

void ClosedFormRho::hessian(const Vec4& x, double H[kND][kND]) const {
  if (h_) { h_(x, H); return; }
  DefiningFunction::hessian(x, H);
}

namespace {
double smoothstep5(double t) {  // quintic, C^2 at both ends
  t = std::clamp(t, 0.0, 1.0);
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}
}  // namespace

TransportedRho::TransportedRho(std::shared_ptr<const DefiningFunction> base,
                               MapField G, Mode mode)
    : base_(std::move(base)), G_(std::move(G)), mode_(mode) {
  box_ = G_.spec();
  // verify G maps the box into the base box (sampled)
  const GridSpec& sp = box_;
  GridSpec coarse(sp.lower, sp.upper, {5, 5, 5, 5});
  for (std::size_t k = 0; k < coarse.node_count(); ++k) {
    Vec4 y = G_.apply_real(coarse.coord(coarse.unflat(k)));
    require(base_->box().contains(y, 1e-9), "pushforward_defining: G leaves the box");
  }
  finalize(base_->interior_seed());
}

double TransportedRho::rho(const Vec4& x) const {
  Vec4 y = G_.apply_real(x);
  double v = base_->rho(y);
  if (mode_ == Mode::Raw) return v;
  double t = (v - blend_lo_) / (blend_hi_ - blend_lo_);
  double chi = 1.0 - smoothstep5(t);
  return chi * v + (1.0 - chi);
}

std::shared_ptr<DefiningFunction> pushforward_defining(
    std::shared_ptr<const DefiningFunction> rho, const MapField& G, bool extended) {
  return std::make_shared<TransportedRho>(
      std::move(rho), G, extended ? TransportedRho::Mode::Extended : TransportedRho::Mode::Raw);
}

std::vector<Vec4> boundary_sample(const DefiningFunction& rho, int count,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec4 c = rho.interior_seed();
  require(rho.rho(c) < 0, "boundary_sample: seed not interior");
  std::vector<Vec4> pts;
  pts.reserve(count);
  int attempts = 0;
  while (int(pts.size()) < count && attempts < 20 * count) {
    ++attempts;
    Vec4 d;
    double n2 = 0;
    for (int a = 0; a < kND; ++a) { d[a] = gauss(rng); n2 += d[a] * d[a]; }
    double n = std::sqrt(n2);
    if (n < 1e-12) continue;
    for (int a = 0; a < kND; ++a) d[a] /= n;
    // bracket rho = 0 along c + t d
    double t0 = 0, t1 = 0;
    bool bracketed = false;
    double tmax = 0;
    for (int a = 0; a < kND; ++a) {
      double span = rho.box().upper[a] - rho.box().lower[a];
      tmax = std::max(tmax, span);
    }
    double prev = rho.rho(c);
    for (double t = 0.02; t <= tmax; t += 0.02) {
      Vec4 x = c + t * d;
      if (!rho.box().contains(x)) break;
      double v = rho.rho(x);
      if (prev < 0 && v >= 0) { t0 = t - 0.02; t1 = t; bracketed = true; break; }
      prev = v;
    }
    if (!bracketed) continue;
    for (int it = 0; it < 80; ++it) {
      double tm = 0.5 * (t0 + t1);
      double v = rho.rho(c + tm * d);
      if (v < 0) t0 = tm; else t1 = tm;
    }
    pts.push_back(c + 0.5 * (t0 + t1) * d);
  }
  require(int(pts.size()) == count, "boundary_sample: could not place requested sample");
  return pts;
}

LeviReport levi_min(const DefiningFunction& rho, const std::vector<Vec4>& sample) {
  LeviReport rep;
  rep.points = sample;
  rep.per_point_min.resize(sample.size());
  rep.sample_size = int(sample.size());
  double gfloor = 1e300, lmin = 1e300;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const Vec4& p = sample[i];
    Vec4 g = rho.grad(p);
    double gn = norm2(g);
    require(gn > 1e-8, "levi_min: |grad rho| below floor at a sample point");
    gfloor = std::min(gfloor, gn);
    cplx H[kNC][kNC];
    rho.complex_hessian(p, H, /*check=*/true);
    C2 w = rho.dz(p);
    // complex tangent for n=2: t = (-w2, w1), normalized
    cplx t1 = -w[1], t2 = w[0];
    double tn = std::sqrt(std::norm(t1) + std::norm(t2));
    require(tn > 1e-12, "levi_min: degenerate complex tangent");
    t1 /= tn;
    t2 /= tn;
    cplx v = H[0][0] * t1 * std::conj(t1) + H[0][1] * t1 * std::conj(t2) +
             H[1][0] * t2 * std::conj(t1) + H[1][1] * t2 * std::conj(t2);
    rep.per_point_min[i] = v.real();
    lmin = std::min(lmin, v.real());
  }
  rep.lambda_min = lmin;
  rep.grad_floor = gfloor;
  return rep;
}

LeviReport levi_min(const DefiningFunction& rho, int count) {
  return levi_min(rho, boundary_sample(rho, count));
}

cplx levi_form_wrt_structure(const DefiningFunction& rho, const GridFunction& A,
                             const Vec4& p) {
  require(A.rank() == Rank::Matrix, "levi_form_wrt_structure: A must be a matrix field");
  const double hl = 2e-3;

  // A entry a(row abar, col b) near p via masked interpolation
  auto Aent = [&](const Vec4& x, int ab, int b) -> cplx {
    return interp_masked(A, ab * kNC + b, x, 2);
  };

  // X_bbar applied to a scalar callable: (d_bbar + A_bbar^mu d_mu) g
  auto wirt = [&](const std::function<cplx(const Vec4&)>& g, const Vec4& x, int axis,
                  bool conj_ax) -> cplx {
    Vec4 xp = x, xm = x, yp = x, ym = x;
    xp[2 * axis] += hl;
    xm[2 * axis] -= hl;
    yp[2 * axis + 1] += hl;
    ym[2 * axis + 1] -= hl;
    cplx dx = (g(xp) - g(xm)) / (2 * hl);
    cplx dy = (g(yp) - g(ym)) / (2 * hl);
    return conj_ax ? 0.5 * (dx + cplx(0, 1) * dy) : 0.5 * (dx - cplx(0, 1) * dy);
  };

  auto rho_c = [&](const Vec4& x) -> cplx { return cplx(rho.rho(x), 0.0); };

  auto Xbar = [&](const std::function<cplx(const Vec4&)>& g, int b, const Vec4& x) {
    cplx v = wirt(g, x, b, true);
    for (int mu = 0; mu < kNC; ++mu) v += Aent(x, b, mu) * wirt(g, x, mu, false);
    return v;
  };
  auto Xhol = [&](const std::function<cplx(const Vec4&)>& g, int a, const Vec4& x) {
    cplx v = wirt(g, x, a, false);
    for (int mu = 0; mu < kNC; ++mu)
      v += std::conj(Aent(x, a, mu)) * wirt(g, x, mu, true);
    return v;
  };

  // frame coefficients in the (d_mu, d_mubar) basis at p:
  //   X_a    = d_a + conj(A_a^mu) d_mubar
  //   X_abar = d_abar + A_abar^mu d_mu
  // dual covector omega^gbar solves M^T w = e(X_gbar)
  // order basis rows: [d_1, d_2, d_1bar, d_2bar]
  cplx M[4][4] = {};
  for (int a = 0; a < kNC; ++a) {
    // column a: X_a
    M[a][a] += 1.0;
    for (int mu = 0; mu < kNC; ++mu) M[2 + mu][a] += std::conj(Aent(p, a, mu));
    // column 2+a: X_abar
    M[2 + a][2 + a] += 1.0;
    for (int mu = 0; mu < kNC; ++mu) M[mu][2 + a] += Aent(p, a, mu);
  }
  // invert the 4x4 (Gauss-Jordan)
  cplx inv[4][4] = {};
  {
    cplx aug[4][8];
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        aug[i][j] = M[i][j];
        aug[i][4 + j] = (i == j) ? 1.0 : 0.0;
      }
    for (int c = 0; c < 4; ++c) {
      int piv = c;
      for (int r = c + 1; r < 4; ++r)
        if (std::abs(aug[r][c]) > std::abs(aug[piv][c])) piv = r;
      require(std::abs(aug[piv][c]) > 1e-10, "levi_form_wrt_structure: frame degenerate");
      if (piv != c)
        for (int j = 0; j < 8; ++j) std::swap(aug[piv][j], aug[c][j]);
      cplx d = aug[c][c];
      for (int j = 0; j < 8; ++j) aug[c][j] /= d;
      for (int r = 0; r < 4; ++r) {
        if (r == c) continue;
        cplx f = aug[r][c];
        for (int j = 0; j < 8; ++j) aug[r][j] -= f * aug[c][j];
      }
    }
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) inv[i][j] = aug[i][4 + j];
  }
  // omega^gbar coefficients: row (2+g) of M^{-1} in the dual pairing:
  // if V = sum v_k e_k (basis d_mu, d_mubar) and V = sum c_j X_j, then
  // c = M^{-1} v; omega^gbar(V) = c_{2+g}.
  auto omega_gbar = [&](int g, const cplx v[4]) {
    cplx s = 0;
    for (int j = 0; j < 4; ++j) s += inv[2 + g][j] * v[j];
    return s;
  };

  // commutator [X_a, X_bbar] coefficients at p:
  //   d_mu slot:    X_a(A_bbar^mu)
  //   d_mubar slot: -X_bbar(conj(A_abar^mu))
  auto commutator = [&](int a, int b, cplx v[4]) {
    for (int mu = 0; mu < kNC; ++mu) {
      auto ent = [&](const Vec4& x) { return Aent(x, b, mu); };
      v[mu] = Xhol(ent, a, p);
      auto entc = [&](const Vec4& x) { return std::conj(Aent(x, a, mu)); };
      v[2 + mu] = -Xbar(entc, b, p);
    }
  };

  // G_{a bbar} = X_a X_bbar rho + X_gbar rho * C^gbar_{a bbar}
  cplx G[kNC][kNC];
  for (int a = 0; a < kNC; ++a)
    for (int b = 0; b < kNC; ++b) {
      auto inner = [&](const Vec4& x) { return Xbar(rho_c, b, x); };
      cplx v = Xhol(inner, a, p);
      cplx comm[4];
      commutator(a, b, comm);
      for (int g = 0; g < kNC; ++g) {
        cplx C = -omega_gbar(g, comm);
        v += Xbar(rho_c, g, p) * C;
      }
      G[a][b] = v;
    }

  // frame L_1 = X_1 - (X_1 rho / X_n rho) X_n, normalized
  cplx X1r = Xhol(rho_c, 0, p);
  cplx X2r = Xhol(rho_c, 1, p);
  require(std::abs(X2r) > 1e-8, "levi_form_wrt_structure: frame degenerate (X_n rho ~ 0)");
  cplx c1 = 1.0, c2 = -X1r / X2r;
  double nn = std::sqrt(std::norm(c1) + std::norm(c2));
  c1 /= nn;
  c2 /= nn;
  cplx val = G[0][0] * c1 * std::conj(c1) + G[0][1] * c1 * std::conj(c2) +
             G[1][0] * c2 * std::conj(c1) + G[1][1] * c2 * std::conj(c2);
  return val;
}

double CapProfile::operator()(double v) const {
  double u = (v - 1.0) / 3.0;
  if (u <= 0) return 0;
  if (u <= 1) return u * u * u;
  return 1.0 + 3.0 * (u - 1.0) + 3.0 * (u - 1.0) * (u - 1.0);
}
double CapProfile::d1(double v) const {
  double u = (v - 1.0) / 3.0;
  if (u <= 0) return 0;
  if (u <= 1) return u * u;  // d/dv = 3u^2 * (1/3)
  return 1.0 + 2.0 * (u - 1.0);
}
double CapProfile::d2(double v) const {
  double u = (v - 1.0) / 3.0;
  if (u <= 0) return 0;
  if (u <= 1) return 2.0 * u / 3.0;
  return 2.0 / 3.0;
}

CappedDomain capped_dilated_domain(const std::function<double(cplx, double)>& h,
                                   double eps, const CapProfile& chi) {
  require(eps > 0, "capped_dilated_domain: eps must be positive");
  GridSpec box = GridSpec::cube(2.2, 9);

  auto rho_eps_f = [h, eps, chi](const Vec4& x) {
    C2 z = to_complex(x);
    double v2 = dot(x, x);
    return -z[1].imag() + std::norm(z[0]) +
           (1.0 / (eps * eps)) * h(eps * z[0], eps * eps * z[1].real()) +
           5.0 * chi(v2);
  };
  auto rho_0_f = [chi](const Vec4& x) {
    C2 z = to_complex(x);
    return -z[1].imag() + std::norm(z[0]) + 5.0 * chi(dot(x, x));
  };

  // containment test of the construction: rho_eps > 0 on the sphere |z| = 2
  {
    std::mt19937_64 rng(777);
    std::normal_distribution<double> gauss;
    for (int i = 0; i < 400; ++i) {
      Vec4 d;
      double n2 = 0;
      for (int a = 0; a < kND; ++a) { d[a] = gauss(rng); n2 += d[a] * d[a]; }
      double n = std::sqrt(n2);
      Vec4 p = (2.0 / n) * d;
      if (rho_eps_f(p) <= 0)
        fail("capped_dilated_domain: eps too large, containment rho_eps > 0 on dB2 fails");
    }
  }

  CappedDomain out;
  Vec4 seed = {0, 0, 0, 0.3};  // y_n > 0 side is inside near the origin
  out.rho_eps = std::make_shared<ClosedFormRho>(box, rho_eps_f, seed);
  out.rho_0 = std::make_shared<ClosedFormRho>(box, rho_0_f, seed);
  out.dist_c2 = c2_distance(*out.rho_eps, *out.rho_0);
  return out;
}

double c2_distance(const DefiningFunction& a, const DefiningFunction& b,
                   int pts_per_axis) {
  GridSpec coarse(a.box().lower, a.box().upper,
                  {pts_per_axis, pts_per_axis, pts_per_axis, pts_per_axis});
  double m = 0;
  for (std::size_t k = 0; k < coarse.node_count(); ++k) {
    Vec4 x = coarse.coord(coarse.unflat(k));
    m = std::max(m, std::abs(a.rho(x) - b.rho(x)));
    Vec4 ga = a.grad(x), gb = b.grad(x);
    for (int i = 0; i < kND; ++i) m = std::max(m, std::abs(ga[i] - gb[i]));
    double Ha[kND][kND], Hb[kND][kND];
    a.hessian(x, Ha);
    b.hessian(x, Hb);
    for (int i = 0; i < kND; ++i)
      for (int j = 0; j < kND; ++j) m = std::max(m, std::abs(Ha[i][j] - Hb[i][j]));
  }
  return m;
}

std::shared_ptr<DefiningFunction> unit_ball_domain(double box_halfwidth) {
  GridSpec box = GridSpec::cube(box_halfwidth, 9);
  auto f = [](const Vec4& x) { return dot(x, x) - 1.0; };
  auto g = [](const Vec4& x) { return 2.0 * x; };
  auto h = [](const Vec4&, double H[kND][kND]) {
    for (int i = 0; i < kND; ++i)
      for (int j = 0; j < kND; ++j) H[i][j] = (i == j) ? 2.0 : 0.0;
  };
  return std::make_shared<ClosedFormRho>(box, f, Vec4{0, 0, 0, 0}, g, h);
}

std::shared_ptr<DefiningFunction> perturbed_ball_domain(double c2_amount,
                                                        double box_halfwidth) {
  auto ball = unit_ball_domain(box_halfwidth);
  // bump g(x) = exp(-|x - x0|^2 / w^2), C2 norm dominated by the Hessian 2/w^2
  Vec4 x0 = {0.55, 0.1, -0.2, 0.35};
  double w = 0.45;
  auto bump = [x0, w](const Vec4& x) {
    Vec4 d = x - x0;
    return std::exp(-dot(d, d) / (w * w));
  };
  // scale so that the sampled C2 distance is c2_amount * ||ball rho||_2
  GridSpec box = GridSpec::cube(box_halfwidth, 9);
  auto probe = std::make_shared<ClosedFormRho>(
      box, [&](const Vec4& x) { return dot(x, x) - 1.0 + bump(x); }, Vec4{0, 0, 0, 0});
  double unit_dist = c2_distance(*probe, *ball);
  double amp = c2_amount * ball->c2norm() / unit_dist;
  auto f = [bump, amp](const Vec4& x) { return dot(x, x) - 1.0 + amp * bump(x); };
  return std::make_shared<ClosedFormRho>(box, f, Vec4{0, 0, 0, 0});
}

}  // namespace acs
