#include "acs/homotopy.hpp"

#include <mutex>
#include <sstream>

#include "acs/interp.hpp"
#include "acs/stencil.hpp"

namespace acs {

namespace {

constexpr double kInvPi2 = 1.0 / (M_PI * M_PI);

// Near-field constants for the singularity-subtracted quadrature, in cell
// units (h = 1). N' is the union of cells whose centers lie within
// near_radius_cells of the origin. For the kernel conj(w_j)/|w|^4:
//   M0_j(d)   = int_{N'} conj(w_j(v - d)) / |v - d|^4 dv   (odd in d)
//   M1_{ja}(0)= int_{N'} v_a conj(w_j(v)) / |v|^4 dv = gamma * (unit structure)
// M0 is used through its Jacobian at 0 (the cubic remainder is negligible for
// the micro-stencil offsets in use).
struct NearTables {
  double r_c = 2.5;
  cplx D0[kNC][kND];  // dM0_j / d d_a at 0
  double gamma = 0;   // int v_0^2 / |v|^4 over N'
};

cplx kernel_conj_over4(const Vec4& v, int j) {
  double r2 = dot(v, v);
  double r4 = r2 * r2;
  return cplx(v[2 * j], -v[2 * j + 1]) / r4;
}

const NearTables& near_tables(double r_c) {
  static std::mutex mtx;
  static std::vector<NearTables> cache;
  std::lock_guard<std::mutex> lk(mtx);
  for (const auto& t : cache)
    if (std::abs(t.r_c - r_c) < 1e-12) return t;

  NearTables t;
  t.r_c = r_c;
  int M = int(std::ceil(r_c)) + 1;
  auto in_union = [&](const Vec4& v) {
    // cell of v has center round(v); member iff |center| <= r_c
    double c2 = 0;
    for (int a = 0; a < kND; ++a) {
      double c = std::round(v[a]);
      c2 += c * c;
    }
    return c2 <= r_c * r_c + 1e-12;
  };

  // refined midpoint sampling of the union shell; pair symmetrization makes
  // the interior (and the singularity) cancel exactly
  const int sigma = 8;
  const double hs = 1.0 / sigma;
  const double w_q = hs * hs * hs * hs;
  double lim = M + 0.5;
  std::vector<Vec4> shell_pts;  // covers every union cell face
  for (double v0 = 0.5 * hs; v0 < lim; v0 += hs)
    for (double v1 = -lim + 0.5 * hs; v1 < lim; v1 += hs)
      for (double v2 = -lim + 0.5 * hs; v2 < lim; v2 += hs)
        for (double v3 = -lim + 0.5 * hs; v3 < lim; v3 += hs) {
          Vec4 v = {v0, v1, v2, v3};
          double r = norm2(v);
          if (r < r_c - 2.2 || r > r_c + 1.2) continue;
          shell_pts.push_back(v);
        }

  // M0(d) = int_{N'-d} k(u) du; removing the symmetric core
  // S = (N'-d) n (d-N') (where the odd kernel integrates to zero) leaves
  // u with u+d in N' and d-u not in N' -- a set near the union boundary.
  double eta = 0.02;  // differentiation step for dM0/dd
  for (int a = 0; a < kND; ++a) {
    Vec4 dp{}, dm{};
    dp[a] = eta;
    dm[a] = -eta;
    cplx Ip[kNC] = {}, Im[kNC] = {};
    for (const Vec4& v : shell_pts) {
      for (int s = 0; s < 2; ++s) {
        Vec4 u = v;
        if (s == 1)
          for (int b = 0; b < kND; ++b) u[b] = -u[b];
        if (in_union(u + dp) && !in_union(dp - u))
          for (int j = 0; j < kNC; ++j) Ip[j] += w_q * kernel_conj_over4(u, j);
        if (in_union(u + dm) && !in_union(dm - u))
          for (int j = 0; j < kNC; ++j) Im[j] += w_q * kernel_conj_over4(u, j);
      }
    }
    for (int j = 0; j < kNC; ++j) t.D0[j][a] = (Ip[j] - Im[j]) / (2.0 * eta);
  }

  // gamma over the full union (integrable |v|^{-2} integrand)
  {
    const int sg = 8;
    const double hg = 1.0 / sg;
    const double wg = hg * hg * hg * hg;
    double g = 0;
    double gl = M + 0.5;
    for (double v0 = -gl + 0.5 * hg; v0 < gl; v0 += hg)
      for (double v1 = -gl + 0.5 * hg; v1 < gl; v1 += hg)
        for (double v2 = -gl + 0.5 * hg; v2 < gl; v2 += hg)
          for (double v3 = -gl + 0.5 * hg; v3 < gl; v3 += hg) {
            Vec4 v = {v0, v1, v2, v3};
            if (!in_union(v)) continue;
            double r2 = dot(v, v);
            if (r2 < 1e-12) continue;
            g += wg * v0 * v0 / (r2 * r2);
          }
    t.gamma = g;
  }

  cache.push_back(t);
  return cache.back();
}

std::uint64_t bit_reverse64(std::uint64_t x) {
  x = ((x & 0x5555555555555555ull) << 1) | ((x >> 1) & 0x5555555555555555ull);
  x = ((x & 0x3333333333333333ull) << 2) | ((x >> 2) & 0x3333333333333333ull);
  x = ((x & 0x0f0f0f0f0f0f0f0full) << 4) | ((x >> 4) & 0x0f0f0f0f0f0f0f0full);
  x = ((x & 0x00ff00ff00ff00ffull) << 8) | ((x >> 8) & 0x00ff00ff00ff00ffull);
  x = ((x & 0x0000ffff0000ffffull) << 16) | ((x >> 16) & 0x0000ffff0000ffffull);
  return (x << 32) | (x >> 32);
}

}  // namespace

FormField FormField::zero_like(const GridSpec& sp, int q,
                               const std::vector<std::uint8_t>& mask) {
  FormField f;
  f.q = q;
  f.coeff = GridFunction(sp, q == 1 ? Rank::Covector : Rank::Scalar);
  f.coeff.set_mask(mask);
  f.coeff.seal_mask();
  return f;
}

LeraySection leray_section(const DefiningFunction& rho, const Vec4& zeta, const Vec4& z) {
  LeraySection s;
  C2 dr = rho.dz(zeta);
  cplx B[kNC][kNC];
  rho.holo_hessian(zeta, B);
  C2 zc = to_complex(z), zetac = to_complex(zeta);
  for (int j = 0; j < kNC; ++j) {
    cplx g = dr[j];
    for (int k = 0; k < kNC; ++k) g += 0.5 * B[j][k] * (zc[k] - zetac[k]);
    s.g[j] = g;
  }
  s.phi = s.g[0] * (zetac[0] - zc[0]) + s.g[1] * (zetac[1] - zc[1]);
  return s;
}

Homotopy::Homotopy(std::shared_ptr<const DefiningFunction> rho, ExtensionConfig ecfg,
                   KernelConfig kcfg)
    : rho_(std::move(rho)), E_(rho_, ecfg), kcfg_(kcfg), sp_(rho_->box()) {
  for (int a = 1; a < kND; ++a)
    require(std::abs(sp_.h(a) - sp_.h(0)) < 1e-12, "Homotopy: grid must be isotropic");
  h_ = sp_.h(0);
  cell_vol_ = h_ * h_ * h_ * h_;

  LeviReport lr = levi_min(*rho_, 120);
  require(lr.lambda_min > 0, "homotopy: domain is not strictly pseudoconvex (lambda_min <= 0)");

  // site lists: extension support (D plus collar) and the exterior collar
  std::vector<std::uint8_t> is_support(sp_.node_count(), 0);
  std::vector<std::uint8_t> is_shell(sp_.node_count(), 0);
  parallel_for(sp_.node_count(), [&](std::size_t k) {
    Vec4 x = sp_.coord(sp_.unflat(k));
    double r = rho_->rho(x);
    if (r <= 0) {
      is_support[k] = 1;
      return;
    }
    auto c = E_.collar_at(x);
    if (c.s < ecfg.delta2) {
      is_support[k] = 1;
      is_shell[k] = 1;
    }
  });
  for (std::size_t k = 0; k < sp_.node_count(); ++k) {
    Vec4 x = sp_.coord(sp_.unflat(k));
    if (is_support[k]) support_sites_.push_back({k, x});
    if (is_shell[k]) shell_sites_.push_back({k, x});
  }
  shell_cache_.resize(shell_sites_.size());
  parallel_for(shell_sites_.size(), [&](std::size_t i) {
    LerayCache c;
    c.drho = rho_->dz(shell_sites_[i].x);
    rho_->holo_hessian(shell_sites_[i].x, c.hess);
    shell_cache_[i] = c;
  });
}

void Homotopy::charge(std::size_t n) const {
  std::size_t v = kernel_evals_.fetch_add(n) + n;
  if (v > kcfg_.max_kernel_evals) fail("homotopy: quadrature budget exceeded");
}

std::vector<std::size_t> Homotopy::targets(const GridSpec& sp, int count) const {
  double hfd = kcfg_.fd_step_factor * h_;
  std::vector<std::pair<std::uint64_t, std::size_t>> cand;
  for (std::size_t k = 0; k < sp.node_count(); ++k) {
    Vec4 x = sp.coord(sp.unflat(k));
    if (rho_->rho(x) >= 0) continue;
    bool ok = true;
    for (int a = 0; a < kND && ok; ++a)
      for (int s = -2; s <= 2 && ok; ++s) {
        if (s == 0) continue;
        Vec4 y = x;
        y[a] += s * hfd;
        if (rho_->rho(y) >= -1e-9) ok = false;
      }
    if (ok) cand.push_back({bit_reverse64(k), k});
  }
  if (int(cand.size()) < count) {
    std::ostringstream os;
    os << "homotopy: only " << cand.size() << " admissible interior targets, need "
       << count;
    fail(os.str());
  }
  std::sort(cand.begin(), cand.end());
  std::vector<std::size_t> out(count);
  for (int i = 0; i < count; ++i) out[i] = cand[i].second;
  return out;
}

Homotopy::Prepared01 Homotopy::prepare01(const FormField& phi) const {
  require(phi.q == 1 && phi.coeff.rank() == Rank::Covector,
          "prepare01: expects a (0,1) form");
  Prepared01 p;
  p.Ephi = E_.extend_grid(phi.coeff);
  GridFunction dphi = dbar_coeff_01(phi.coeff);  // on the mask
  GridFunction Edphi = E_.extend_grid(dphi);
  GridFunction dEphi = dbar_coeff_01(p.Ephi);  // centered, on the box
  p.comm = axpy(cplx(-1, 0), Edphi, dEphi);
  for (int j = 0; j < kNC; ++j) {
    GridFunction comp = p.Ephi.component(j);
    GridFunction pack(sp_, Rank::Matrix);
    for (int a = 0; a < kND; ++a) {
      GridFunction da = real_partial(comp, a);
      for (std::size_t k = 0; k < pack.nodes(); ++k) pack.at(k, a) = da.at(k);
    }
    p.grads[j] = std::move(pack);
  }
  return p;
}

Homotopy::Prepared2 Homotopy::prepare2(const GridFunction& g_coeff) const {
  require(g_coeff.rank() == Rank::Scalar, "prepare2: expects a (0,2) coefficient");
  Prepared2 p;
  p.Eg = E_.extend_grid(g_coeff);
  p.grads = GridFunction(sp_, Rank::Matrix);
  for (int a = 0; a < kND; ++a) {
    GridFunction da = real_partial(p.Eg, a);
    for (std::size_t k = 0; k < p.grads.nodes(); ++k) p.grads.at(k, a) = da.at(k);
  }
  return p;
}

cplx Homotopy::P_at(const Prepared01& p, const Vec4& z) const {
  const double reg2 = kcfg_.delta_reg * kcfg_.delta_reg;
  const bool corr = kcfg_.singular_correction;
  const double Rn = kcfg_.near_radius_cells * h_;
  const double Rn2 = Rn * Rn;

  // snap to the nearest node
  Idx4 si;
  for (int a = 0; a < kND; ++a) {
    int i = int(std::lround((z[a] - sp_.lower[a]) / h_));
    si[a] = std::clamp(i, 0, sp_.npts[a] - 1);
  }
  std::size_t snap = sp_.flat(si);
  Vec4 zs = sp_.coord(si);
  Vec4 delta = z - zs;

  cplx psi0[kNC];
  cplx grad0[kNC][kND];
  for (int j = 0; j < kNC; ++j) {
    psi0[j] = p.Ephi.at(snap, j);
    for (int a = 0; a < kND; ++a) grad0[j][a] = p.grads[j].at(snap, a);
  }

  charge(support_sites_.size() + shell_sites_.size());

  cplx sum(0, 0);
  for (const Site& s : support_sites_) {
    Vec4 w = s.x - z;
    double r2 = dot(w, w) + reg2;
    Vec4 ws = s.x - zs;
    bool near = corr && dot(ws, ws) <= Rn2;
    if (!near) {
      double r4 = r2 * r2;
      cplx num = p.Ephi.at(s.node, 0) * cplx(w[0], -w[1]) +
                 p.Ephi.at(s.node, 1) * cplx(w[2], -w[3]);
      sum += num / r4;
      continue;
    }
    if (s.node == snap && dot(w, w) < 1e-24) continue;  // exact singular node
    cplx num(0, 0);
    for (int j = 0; j < kNC; ++j) {
      cplx bracket = p.Ephi.at(s.node, j) - psi0[j];
      for (int a = 0; a < kND; ++a) bracket -= grad0[j][a] * ws[a];
      num += bracket * cplx(w[2 * j], -w[2 * j + 1]);
    }
    if (s.node == snap) {
      // bracket vanishes at the snap node by construction
      continue;
    }
    sum += num / (r2 * r2);
  }
  sum *= cell_vol_;

  if (corr) {
    const NearTables& nt = near_tables(kcfg_.near_radius_cells);
    for (int j = 0; j < kNC; ++j) {
      cplx m0(0, 0);
      for (int a = 0; a < kND; ++a) m0 += nt.D0[j][a] * (delta[a] / h_);
      sum += psi0[j] * h_ * m0;
      // gradient moment: int v_a conj(w_j) /|v|^4 = gamma (d_{a,2j} - i d_{a,2j+1})
      sum += h_ * h_ * nt.gamma *
             (grad0[j][2 * j] - cplx(0, 1) * grad0[j][2 * j + 1]);
    }
  }

  cplx P1 = -kInvPi2 * sum;

  // transition term over the exterior collar
  C2 zc = to_complex(z);
  cplx tsum(0, 0);
  for (std::size_t i = 0; i < shell_sites_.size(); ++i) {
    const Site& s = shell_sites_[i];
    cplx c = p.comm.at(s.node);
    if (c == cplx(0, 0)) continue;
    Vec4 w = s.x - z;
    double phi0 = dot(w, w) + reg2;
    const LerayCache& lc = shell_cache_[i];
    cplx w1[kNC];
    C2 zetac = to_complex(s.x);
    for (int j = 0; j < kNC; ++j) {
      w1[j] = lc.drho[j];
      for (int k = 0; k < kNC; ++k) w1[j] += 0.5 * lc.hess[j][k] * (zc[k] - zetac[k]);
    }
    cplx phi1 = w1[0] * (zetac[0] - zc[0]) + w1[1] * (zetac[1] - zc[1]) + reg2;
    cplx det = cplx(w[0], -w[1]) * w1[1] - cplx(w[2], -w[3]) * w1[0];
    tsum += det / (phi0 * phi1) * c;
  }
  cplx T = -kInvPi2 * cell_vol_ * tsum;
  return P1 + T;
}

C2 Homotopy::Q_at(const Prepared2& p, const Vec4& z) const {
  const double reg2 = kcfg_.delta_reg * kcfg_.delta_reg;
  const bool corr = kcfg_.singular_correction;
  const double Rn = kcfg_.near_radius_cells * h_;
  const double Rn2 = Rn * Rn;

  Idx4 si;
  for (int a = 0; a < kND; ++a) {
    int i = int(std::lround((z[a] - sp_.lower[a]) / h_));
    si[a] = std::clamp(i, 0, sp_.npts[a] - 1);
  }
  std::size_t snap = sp_.flat(si);
  Vec4 zs = sp_.coord(si);
  Vec4 delta = z - zs;
  cplx g0 = p.Eg.at(snap);
  cplx gg[kND];
  for (int a = 0; a < kND; ++a) gg[a] = p.grads.at(snap, a);

  charge(support_sites_.size());

  // kernels: (Qg)_1 pairs +conj(w_2), (Qg)_2 pairs -conj(w_1)
  cplx s1(0, 0), s2(0, 0);
  for (const Site& s : support_sites_) {
    Vec4 w = s.x - z;
    double r2 = dot(w, w) + reg2;
    Vec4 ws = s.x - zs;
    bool near = corr && dot(ws, ws) <= Rn2;
    cplx dens;
    if (!near) {
      dens = p.Eg.at(s.node);
    } else {
      if (s.node == snap) continue;  // bracket vanishes / singular
      dens = p.Eg.at(s.node) - g0;
      for (int a = 0; a < kND; ++a) dens -= gg[a] * ws[a];
    }
    double r4 = r2 * r2;
    s1 += dens * cplx(w[2], -w[3]) / r4;
    s2 += dens * cplx(w[0], -w[1]) / r4;
  }
  s1 *= cell_vol_;
  s2 *= cell_vol_;
  if (corr) {
    const NearTables& nt = near_tables(kcfg_.near_radius_cells);
    cplx m0_1(0, 0), m0_2(0, 0);
    for (int a = 0; a < kND; ++a) {
      m0_1 += nt.D0[1][a] * (delta[a] / h_);  // conj(w_2) kernel -> j = 1
      m0_2 += nt.D0[0][a] * (delta[a] / h_);
    }
    s1 += g0 * h_ * m0_1 + h_ * h_ * nt.gamma * (gg[2] - cplx(0, 1) * gg[3]);
    s2 += g0 * h_ * m0_2 + h_ * h_ * nt.gamma * (gg[0] - cplx(0, 1) * gg[1]);
  }
  return {kInvPi2 * s1, -kInvPi2 * s2};
}

C2 Homotopy::dbarP_at(const Prepared01& p, const Vec4& z) const {
  const double hfd = kcfg_.fd_step_factor * h_;
  C2 out{};
  for (int al = 0; al < kNC; ++al) {
    cplx dx, dy;
    {
      Vec4 a1 = z, a2 = z, a3 = z, a4 = z;
      a1[2 * al] += hfd;
      a2[2 * al] -= hfd;
      a3[2 * al] += 2 * hfd;
      a4[2 * al] -= 2 * hfd;
      dx = (-P_at(p, a3) + 8.0 * P_at(p, a1) - 8.0 * P_at(p, a2) + P_at(p, a4)) /
           (12.0 * hfd);
    }
    {
      Vec4 a1 = z, a2 = z, a3 = z, a4 = z;
      a1[2 * al + 1] += hfd;
      a2[2 * al + 1] -= hfd;
      a3[2 * al + 1] += 2 * hfd;
      a4[2 * al + 1] -= 2 * hfd;
      dy = (-P_at(p, a3) + 8.0 * P_at(p, a1) - 8.0 * P_at(p, a2) + P_at(p, a4)) /
           (12.0 * hfd);
    }
    out[al] = 0.5 * (dx + cplx(0, 1) * dy);
  }
  return out;
}

GridFunction Homotopy::P_on_mask(const FormField& phi) const {
  Prepared01 p = prepare01(phi);
  GridFunction out(sp_, Rank::Scalar);
  out.set_mask(phi.coeff.mask());
  parallel_for(sp_.node_count(), [&](std::size_t k) {
    if (!phi.coeff.in_mask(k)) return;
    out.at(k) = P_at(p, sp_.coord(sp_.unflat(k)));
  });
  out.seal_mask();
  return out;
}

HomotopyApplyResult homotopy_apply(const FormField& phi,
                                   std::shared_ptr<const DefiningFunction> rho,
                                   ExtensionConfig ecfg, KernelConfig kcfg) {
  Homotopy H(std::move(rho), ecfg, kcfg);
  HomotopyApplyResult res;
  res.target_nodes = H.targets(phi.coeff.spec(), kcfg.target_count);
  const GridSpec& sp = phi.coeff.spec();
  if (phi.q == 1) {
    auto p = H.prepare01(phi);
    res.p_values.resize(res.target_nodes.size());
    parallel_for(res.target_nodes.size(), [&](std::size_t i) {
      res.p_values[i] = H.P_at(p, sp.coord(sp.unflat(res.target_nodes[i])));
    });
  } else {
    require(phi.q == 2, "homotopy_apply: q must be 1 or 2");
    auto p = H.prepare2(phi.coeff);
    res.q_values.resize(res.target_nodes.size());
    parallel_for(res.target_nodes.size(), [&](std::size_t i) {
      res.q_values[i] = H.Q_at(p, sp.coord(sp.unflat(res.target_nodes[i])));
    });
  }
  return res;
}

ResidualReport homotopy_residual(const FormField& phi,
                                 std::shared_ptr<const DefiningFunction> rho,
                                 ExtensionConfig ecfg, KernelConfig kcfg) {
  require(phi.q == 1, "homotopy_residual: expects a (0,1) form");
  Homotopy H(std::move(rho), ecfg, kcfg);
  const GridSpec& sp = phi.coeff.spec();
  auto p01 = H.prepare01(phi);
  GridFunction dphi = dbar_coeff_01(phi.coeff);
  auto p2 = H.prepare2(dphi);

  ResidualReport rep;
  rep.target_nodes = H.targets(sp, kcfg.target_count);
  rep.residual.resize(rep.target_nodes.size());
  std::ostringstream tag;
  tag << sp.npts[0] << "^4";
  rep.grid_tag = tag.str();

  parallel_for(rep.target_nodes.size(), [&](std::size_t i) {
    std::size_t k = rep.target_nodes[i];
    Vec4 z = sp.coord(sp.unflat(k));
    C2 dP = H.dbarP_at(p01, z);
    C2 Qd = H.Q_at(p2, z);
    for (int j = 0; j < kNC; ++j)
      rep.residual[i][j] = phi.coeff.at(k, j) - dP[j] - Qd[j];
  });
  double sup = 0;
  for (const auto& r : rep.residual)
    for (int j = 0; j < kNC; ++j) sup = std::max(sup, std::abs(r[j]));
  rep.sup = sup;
  return rep;
}

}  // namespace acs
