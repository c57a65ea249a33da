#include "acs/structures.hpp"

#include <random>
#include <sstream>

#include "acs/interp.hpp"
#include "acs/stencil.hpp"

namespace acs {

namespace {

struct Mat2 {
  cplx m[kNC][kNC] = {};
  static Mat2 id() {
    Mat2 r;
    r.m[0][0] = r.m[1][1] = 1.0;
    return r;
  }
  cplx det() const { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }
  Mat2 inv() const {
    cplx d = det();
    require(std::abs(d) > 1e-10, "structure transform: prefactor matrix singular");
    Mat2 r;
    r.m[0][0] = m[1][1] / d;
    r.m[1][1] = m[0][0] / d;
    r.m[0][1] = -m[0][1] / d;
    r.m[1][0] = -m[1][0] / d;
    return r;
  }
  Mat2 operator*(const Mat2& o) const {
    Mat2 r;
    for (int i = 0; i < kNC; ++i)
      for (int j = 0; j < kNC; ++j) {
        cplx s = 0;
        for (int k = 0; k < kNC; ++k) s += m[i][k] * o.m[k][j];
        r.m[i][j] = s;
      }
    return r;
  }
  Mat2 operator+(const Mat2& o) const {
    Mat2 r;
    for (int i = 0; i < kNC; ++i)
      for (int j = 0; j < kNC; ++j) r.m[i][j] = m[i][j] + o.m[i][j];
    return r;
  }
};

Mat2 mat_at(const GridFunction& A, std::size_t node) {
  Mat2 r;
  for (int i = 0; i < kNC; ++i)
    for (int j = 0; j < kNC; ++j) r.m[i][j] = A.at(node, i * kNC + j);
  return r;
}

void put_mat(GridFunction& A, std::size_t node, const Mat2& m) {
  for (int i = 0; i < kNC; ++i)
    for (int j = 0; j < kNC; ++j) A.at(node, i * kNC + j) = m.m[i][j];
}

// amplitude guard |A|_0 < 1/(2n) for transforms that invert I + df terms
void check_amplitude(const Structure& A, const char* who) {
  double s = A.sup();
  if (s >= 1.0 / (2 * kNC)) {
    std::ostringstream os;
    os << who << ": |A|_0 = " << s << " violates the 1/(2n) amplitude guard";
    fail(os.str());
  }
}

}  // namespace

Structure Structure::zero(const GridSpec& sp, const std::vector<std::uint8_t>& mask) {
  Structure s;
  s.A = GridFunction(sp, Rank::Matrix);
  s.A.set_mask(mask);
  s.A.seal_mask();
  return s;
}

IntegrabilityReport integrability_defect(const Structure& A) {
  const GridFunction& F = A.A;
  require(F.rank() == Rank::Matrix, "integrability_defect: matrix field expected");
  // Wirtinger derivatives of every entry
  GridFunction d1b = wirtinger_derivative(F, 0, true);
  GridFunction d2b = wirtinger_derivative(F, 1, true);
  GridFunction d1 = wirtinger_derivative(F, 0, false);
  GridFunction d2 = wirtinger_derivative(F, 1, false);

  IntegrabilityReport rep;
  rep.torsion = GridFunction(F.spec(), Rank::Covector);
  rep.torsion.set_mask(F.mask());
  for (std::size_t k = 0; k < F.nodes(); ++k) {
    if (!F.in_mask(k)) continue;
    for (int g = 0; g < kNC; ++g) {
      // X_1bar A^g_2bar - X_2bar A^g_1bar, entries A[abar][b] at abar*n+b
      cplx t = d1b.at(k, 1 * kNC + g) - d2b.at(k, 0 * kNC + g);
      for (int mu = 0; mu < kNC; ++mu) {
        const GridFunction& dmu = (mu == 0) ? d1 : d2;
        t += F.at(k, 0 * kNC + mu) * dmu.at(k, 1 * kNC + g);
        t -= F.at(k, 1 * kNC + mu) * dmu.at(k, 0 * kNC + g);
      }
      rep.torsion.at(k, g) = t;
      double av = std::abs(t);
      if (av > rep.per_component[g]) rep.per_component[g] = av;
      if (av > rep.sup) rep.sup = av;
    }
  }
  rep.torsion.seal_mask();
  return rep;
}

Structure oracle_structure(const MapField& phi, const GridSpec& sp,
                           const std::vector<std::uint8_t>& mask) {
  Structure s;
  s.A = GridFunction(sp, Rank::Matrix);
  s.A.set_mask(mask);
  for (std::size_t k = 0; k < s.A.nodes(); ++k) {
    if (!s.A.in_mask(k)) continue;
    Vec4 x = sp.coord(sp.unflat(k));
    cplx dz[kNC][kNC], dzb[kNC][kNC];
    phi.wirtinger(x, dz, dzb);
    double sup_dz = 0;
    for (int i = 0; i < kNC; ++i)
      for (int j = 0; j < kNC; ++j) sup_dz = std::max(sup_dz, std::abs(dz[i][j]));
    require(sup_dz < 0.5, "oracle_structure: |d phi|_0 must be < 1/2");
    Mat2 dbar, dzm;
    for (int i = 0; i < kNC; ++i)
      for (int j = 0; j < kNC; ++j) {
        dbar.m[i][j] = dzb[i][j];
        dzm.m[i][j] = dz[i][j];
      }
    Mat2 M = Mat2::id() + dzm;
    cplx det = M.det();
    require(std::abs(det) > 1e-10, "oracle_structure: I + d phi singular at a node");
    Mat2 A = dbar * M.inv();
    for (int i = 0; i < kNC; ++i)
      for (int j = 0; j < kNC; ++j) A.m[i][j] = -A.m[i][j];
    put_mat(s.A, k, A);
  }
  s.A.seal_mask();
  return s;
}

GridFunction structure_transform_at_nodes(const Structure& A, const MapField& F) {
  check_amplitude(A, "pushforward_structure");
  const GridSpec& sp = A.A.spec();
  GridFunction out(sp, Rank::Matrix);
  out.set_mask(A.A.mask());
  parallel_for(A.A.nodes(), [&](std::size_t k) {
    if (!A.A.in_mask(k)) return;
    Vec4 x = sp.coord(sp.unflat(k));
    cplx dz[kNC][kNC], dzb[kNC][kNC];
    F.wirtinger(x, dz, dzb);
    Mat2 a = mat_at(A.A, k);
    // numerator: A + dbar f + A d f
    Mat2 num = a;
    for (int i = 0; i < kNC; ++i)
      for (int j = 0; j < kNC; ++j) {
        num.m[i][j] += dzb[i][j];
        for (int g = 0; g < kNC; ++g) num.m[i][j] += a.m[i][g] * dz[g][j];
      }
    // prefactor: C = I + conj(d f) + A conj(dbar f)
    Mat2 C = Mat2::id();
    for (int i = 0; i < kNC; ++i)
      for (int j = 0; j < kNC; ++j) {
        C.m[i][j] += std::conj(dz[i][j]);
        for (int g = 0; g < kNC; ++g) C.m[i][j] += a.m[i][g] * std::conj(dzb[g][j]);
      }
    put_mat(out, k, C.inv() * num);
  });
  out.seal_mask();
  return out;
}

Structure pushforward_structure(const Structure& A, const MapField& F,
                                const MapField& G,
                                const std::vector<std::uint8_t>& new_mask) {
  const GridSpec& sp = A.A.spec();
  GridFunction transformed = structure_transform_at_nodes(A, F);

  // scattered image samples
  std::vector<Vec4> pts;
  std::vector<std::array<cplx, kNC * kNC>> vals;
  for (std::size_t k = 0; k < sp.node_count(); ++k) {
    if (!A.A.in_mask(k)) continue;
    Vec4 x = sp.coord(sp.unflat(k));
    pts.push_back(F.apply_real(x));
    std::array<cplx, kNC * kNC> v;
    for (int c = 0; c < kNC * kNC; ++c) v[c] = transformed.at(k, c);
    vals.push_back(v);
  }
  std::size_t count = 0;
  for (auto m : new_mask) count += m;
  require(count > 0, "pushforward_structure: image mask empty");
  require(!pts.empty(), "pushforward_structure: source mask empty");

  Structure out;
  out.A = GridFunction(sp, Rank::Matrix);
  out.A.set_mask(new_mask);
  double radius = 2.5 * sp.h_max();
  for (int c = 0; c < kNC * kNC; ++c) {
    std::vector<cplx> comp(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) comp[i] = vals[i][c];
    MlsInterpolator mls(pts, std::move(comp), radius);
    parallel_for(sp.node_count(), [&](std::size_t k) {
      if (!new_mask[k]) return;
      out.A.at(k, c) = mls.eval(sp.coord(sp.unflat(k)));
    });
  }
  (void)G;  // the inverse fixes the mask; resampling uses the forward images
  out.A.seal_mask();
  return out;
}

Structure structure_clinear(const Structure& A, const cplx L[kNC][kNC]) {
  // new frame matrix: A' = (conj(L)^T)^{-1} A L^T, constant matrices
  Mat2 Lm, Lct;
  for (int i = 0; i < kNC; ++i)
    for (int j = 0; j < kNC; ++j) {
      Lm.m[i][j] = L[i][j];
      Lct.m[i][j] = std::conj(L[j][i]);
    }
  Mat2 pre = Lct.inv();
  Mat2 Lt;
  for (int i = 0; i < kNC; ++i)
    for (int j = 0; j < kNC; ++j) Lt.m[i][j] = Lm.m[j][i];
  Structure out = A;
  for (std::size_t k = 0; k < A.A.nodes(); ++k) {
    if (!A.A.in_mask(k)) continue;
    put_mat(out.A, k, pre * mat_at(A.A, k) * Lt);
  }
  return out;
}

FiveTerms five_terms(const Structure& A, std::shared_ptr<const DefiningFunction>,
                     double t, const Mollifier& mol, const Homotopy& H,
                     const MapField& f) {
  const GridSpec& sp = A.A.spec();
  const auto& mask = A.A.mask();
  FiveTerms out;
  auto masked_matrix = [&]() {
    GridFunction g(sp, Rank::Matrix);
    g.set_mask(mask);
    return g;
  };
  out.I1 = masked_matrix();
  out.I2 = masked_matrix();
  out.I3 = masked_matrix();
  out.I4 = masked_matrix();
  out.I5 = masked_matrix();

  const ExtensionOperator& E = H.extension();

  // I1 = (I - S_t) E A, componentwise
  {
    GridFunction EA = E.extend_grid(A.A);
    GridFunction SEA = smooth_field(EA, t, mol, 4, true);
    for (std::size_t k = 0; k < sp.node_count(); ++k) {
      if (!mask[k]) continue;
      for (int c = 0; c < kNC * kNC; ++c)
        out.I1.at(k, c) = EA.at(k, c) - SEA.at(k, c);
    }
  }

  // per-beta pieces: dbar A^beta (0,2) and P A^beta
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

    // I2^beta = S_t E (Q dbar A^beta)
    {
      GridFunction g = dbar_coeff_01(Ab.coeff);
      auto p2 = H.prepare2(g);
      GridFunction Qg(sp, Rank::Covector);
      Qg.set_mask(mask);
      parallel_for(sp.node_count(), [&](std::size_t k) {
        if (!mask[k]) return;
        C2 v = H.Q_at(p2, sp.coord(sp.unflat(k)));
        Qg.at(k, 0) = v[0];
        Qg.at(k, 1) = v[1];
      });
      Qg.seal_mask();
      GridFunction EQ = E.extend_grid(Qg);
      GridFunction SEQ = smooth_field(EQ, t, mol, 4, true);
      for (std::size_t k = 0; k < sp.node_count(); ++k) {
        if (!mask[k]) continue;
        out.I2.at(k, 0 * kNC + beta) = SEQ.at(k, 0);
        out.I2.at(k, 1 * kNC + beta) = SEQ.at(k, 1);
      }
    }

    // I3^beta = -S_t [dbar, E] P A^beta
    {
      GridFunction PA = H.P_on_mask(Ab);
      GridFunction EPA = E.extend_grid(PA);
      GridFunction dPA1 = wirtinger_derivative(PA, 0, true);
      GridFunction dPA2 = wirtinger_derivative(PA, 1, true);
      GridFunction comm(sp, Rank::Covector);
      GridFunction dE1 = wirtinger_derivative(EPA, 0, true);
      GridFunction dE2 = wirtinger_derivative(EPA, 1, true);
      GridFunction Ed1 = E.extend_grid(dPA1);
      GridFunction Ed2 = E.extend_grid(dPA2);
      for (std::size_t k = 0; k < sp.node_count(); ++k) {
        comm.at(k, 0) = dE1.at(k) - Ed1.at(k);
        comm.at(k, 1) = dE2.at(k) - Ed2.at(k);
      }
      GridFunction Sc = smooth_field(comm, t, mol, 4, true);
      for (std::size_t k = 0; k < sp.node_count(); ++k) {
        if (!mask[k]) continue;
        out.I3.at(k, 0 * kNC + beta) = -Sc.at(k, 0);
        out.I3.at(k, 1 * kNC + beta) = -Sc.at(k, 1);
      }
    }
  }

  // I4 = A d f, I5 = conj(d f) + A conj(dbar f)
  parallel_for(sp.node_count(), [&](std::size_t k) {
    if (!mask[k]) return;
    Vec4 x = sp.coord(sp.unflat(k));
    cplx dz[kNC][kNC], dzb[kNC][kNC];
    f.wirtinger(x, dz, dzb);
    Mat2 a = mat_at(A.A, k);
    for (int i = 0; i < kNC; ++i)
      for (int j = 0; j < kNC; ++j) {
        cplx i4 = 0, i5 = std::conj(dz[i][j]);
        for (int g = 0; g < kNC; ++g) {
          i4 += a.m[i][g] * dz[g][j];
          i5 += a.m[i][g] * std::conj(dzb[g][j]);
        }
        out.I4.at(k, i * kNC + j) = i4;
        out.I5.at(k, i * kNC + j) = i5;
      }
  });

  // Atilde and the direct route share the prefactor (I + I5)
  out.Atilde = masked_matrix();
  out.direct = masked_matrix();
  double agree = 0;
  for (std::size_t k = 0; k < sp.node_count(); ++k) {
    if (!mask[k]) continue;
    Mat2 I5 = mat_at(out.I5, k);
    Mat2 pre = (Mat2::id() + I5).inv();
    Mat2 sum = mat_at(out.I1, k) + mat_at(out.I2, k) + mat_at(out.I3, k) +
               mat_at(out.I4, k);
    Mat2 at = pre * sum;
    put_mat(out.Atilde, k, at);

    Vec4 x = sp.coord(sp.unflat(k));
    cplx dz[kNC][kNC], dzb[kNC][kNC];
    f.wirtinger(x, dz, dzb);
    Mat2 a = mat_at(A.A, k);
    Mat2 num = a;
    for (int i = 0; i < kNC; ++i)
      for (int j = 0; j < kNC; ++j) {
        num.m[i][j] += dzb[i][j];
        for (int g = 0; g < kNC; ++g) num.m[i][j] += a.m[i][g] * dz[g][j];
      }
    Mat2 dir = pre * num;
    put_mat(out.direct, k, dir);
    for (int i = 0; i < kNC; ++i)
      for (int j = 0; j < kNC; ++j)
        agree = std::max(agree, std::abs(at.m[i][j] - dir.m[i][j]));
  }
  out.Atilde.seal_mask();
  out.direct.seal_mask();
  out.agreement_sup = agree;
  return out;
}

JetNormalization normalize_jet(const Structure& A,
                               std::shared_ptr<const DefiningFunction> rho,
                               const Vec4& p, double defect_tol) {
  const GridSpec& sp = A.A.spec();
  JetNormalization out;

  // defect symmetry at p (Lemma 2.2 hypothesis)
  {
    IntegrabilityReport rep = integrability_defect(A);
    double dv = 0;
    for (int g = 0; g < kNC; ++g) dv = std::max(dv, std::abs(interp_masked(rep.torsion, g, p, 2)));
    require(dv <= defect_tol,
            "normalize_jet: integrability defect at p exceeds tolerance");
  }

  // (a) real-linear step f(z) = -A(p) zbar
  cplx A0[kNC][kNC];
  for (int i = 0; i < kNC; ++i)
    for (int j = 0; j < kNC; ++j)
      A0[i][j] = interp_masked(A.A, i * kNC + j, p, 2);
  for (int i = 0; i < kNC; ++i)
    for (int j = 0; j < kNC; ++j) out.A_at_p[i][j] = A0[i][j];

  cplx A0c[kNC][kNC];
  for (int i = 0; i < kNC; ++i)
    for (int j = 0; j < kNC; ++j) A0c[i][j] = A0[i][j];
  auto f_lin = [A0c](const Vec4& x) -> C2 {
    C2 z = to_complex(x);
    C2 o{};
    for (int b = 0; b < kNC; ++b) {
      cplx v = 0;
      for (int a = 0; a < kNC; ++a) v -= A0c[a][b] * std::conj(z[a]);
      o[b] = v;
    }
    return o;
  };
  auto zero2 = [](const Vec4&) -> C2 { return {}; };
  auto dbar_lin = [A0c](int a) {
    return [A0c, a](const Vec4&) -> C2 {
      return {-A0c[a][0], -A0c[a][1]};
    };
  };
  out.linear_map = MapField::from_closed_form(sp, f_lin, zero2, zero2,
                                              dbar_lin(0), dbar_lin(1));
  Structure step_a = pushforward_structure(A, out.linear_map,
                                           out.linear_map.inverse(), A.A.mask());

  // (b) quadratic step about p with coefficients from DA(p)
  cplx D1[kNC][kNC][kNC];  // d_g A[abar][b] at p
  cplx D2[kNC][kNC][kNC];  // d_gbar A[abar][b] at p
  const double hl = 2.0 * sp.h_max();
  for (int g = 0; g < kNC; ++g)
    for (int a = 0; a < kNC; ++a)
      for (int b = 0; b < kNC; ++b) {
        int c = a * kNC + b;
        Vec4 xp = p, xm = p, yp = p, ym = p;
        xp[2 * g] += hl;
        xm[2 * g] -= hl;
        yp[2 * g + 1] += hl;
        ym[2 * g + 1] -= hl;
        cplx dx = (interp_masked(step_a.A, c, xp, 2) - interp_masked(step_a.A, c, xm, 2)) /
                  (2 * hl);
        cplx dy = (interp_masked(step_a.A, c, yp, 2) - interp_masked(step_a.A, c, ym, 2)) /
                  (2 * hl);
        D1[g][a][b] = 0.5 * (dx - cplx(0, 1) * dy);
        D2[g][a][b] = 0.5 * (dx + cplx(0, 1) * dy);
      }

  C2 pc = to_complex(p);
  auto f_quad = [D1, D2, pc](const Vec4& x) -> C2 {
    C2 z = to_complex(x);
    C2 w = {z[0] - pc[0], z[1] - pc[1]};
    C2 o{};
    for (int b = 0; b < kNC; ++b) {
      cplx v = 0;
      for (int g = 0; g < kNC; ++g)
        for (int a = 0; a < kNC; ++a) {
          v -= D1[g][a][b] * w[g] * std::conj(w[a]);
          v -= 0.5 * D2[g][a][b] * std::conj(w[g]) * std::conj(w[a]);
        }
      o[b] = v;
    }
    return o;
  };
  auto dz_quad = [D1, pc](int g) {
    return [D1, pc, g](const Vec4& x) -> C2 {
      C2 z = to_complex(x);
      C2 w = {z[0] - pc[0], z[1] - pc[1]};
      C2 o{};
      for (int b = 0; b < kNC; ++b) {
        cplx v = 0;
        for (int a = 0; a < kNC; ++a) v -= D1[g][a][b] * std::conj(w[a]);
        o[b] = v;
      }
      return o;
    };
  };
  auto dzb_quad = [D1, D2, pc](int g) {
    return [D1, D2, pc, g](const Vec4& x) -> C2 {
      C2 z = to_complex(x);
      C2 w = {z[0] - pc[0], z[1] - pc[1]};
      C2 o{};
      for (int b = 0; b < kNC; ++b) {
        cplx v = 0;
        for (int gg = 0; gg < kNC; ++gg) v -= D1[gg][g][b] * w[gg];
        for (int a = 0; a < kNC; ++a)
          v -= 0.5 * (D2[g][a][b] + D2[a][g][b]) * std::conj(w[a]);
        o[b] = v;
      }
      return o;
    };
  };
  out.quadratic_map = MapField::from_closed_form(sp, f_quad, dz_quad(0), dz_quad(1),
                                                 dzb_quad(0), dzb_quad(1));
  out.result = pushforward_structure(step_a, out.quadratic_map,
                                     out.quadratic_map.inverse(), A.A.mask());
  (void)rho;
  return out;
}

BoundaryNormalForm boundary_normal_form(std::shared_ptr<const DefiningFunction> rho,
                                        const Structure& A, const Vec4& p) {
  // precondition: A = o(|z - p|) nearby (sampled check)
  {
    double near = 0, far = 0;
    for (int c = 0; c < kNC * kNC; ++c) {
      for (double d : {0.1, 0.2}) {
        Vec4 q = p;
        q[0] -= d;  // step inward-ish along x1
        double v = std::abs(interp_masked(A.A, c, q, 2));
        if (d < 0.15) near = std::max(near, v);
        else far = std::max(far, v);
      }
    }
    require(near <= far + 0.05, "boundary_normal_form: A does not vanish near p");
  }

  C2 pc = to_complex(p);
  C2 w = rho->dz(p);
  double wn = std::sqrt(std::norm(w[0]) + std::norm(w[1]));
  require(wn > 1e-8, "boundary_normal_form: d rho vanishes at p");

  // (1) complex-linear: zeta_n = 2i <w, z - p>, zeta' = unit vector orthogonal
  // to w (so that rho = -Im zeta_n + O(2))
  C2 e1 = {std::conj(w[1]) / wn, -std::conj(w[0]) / wn};
  C2 en = {2.0 * cplx(0, 1) * w[0], 2.0 * cplx(0, 1) * w[1]};
  auto lin = [e1, en, pc](const C2& z) -> C2 {
    C2 d = {z[0] - pc[0], z[1] - pc[1]};
    // zeta_1 = <d, conj(e1-row)>: row vectors act linearly
    return {e1[0] * d[0] + e1[1] * d[1], en[0] * d[0] + en[1] * d[1]};
  };
  // inverse of the constant linear map
  cplx det = e1[0] * en[1] - e1[1] * en[0];
  require(std::abs(det) > 1e-10, "boundary_normal_form: linear step degenerate");
  auto lin_inv = [e1, en, pc, det](const C2& zeta) -> C2 {
    cplx d0 = (en[1] * zeta[0] - e1[1] * zeta[1]) / det;
    cplx d1 = (-en[0] * zeta[0] + e1[0] * zeta[1]) / det;
    return {pc[0] + d0, pc[1] + d1};
  };

  // rho in the linear coordinates
  auto rho_lin = [rho, lin_inv](const C2& zeta) {
    return rho->rho(to_real(lin_inv(zeta)));
  };

  // (2) solve the graph y_n = F(z', x_n) on samples and fit its quadratic part
  // variables v = (x1, y1, x2), 10 quadratic monomials incl. linear terms
  auto graph_yn = [&](double x1, double y1, double x2) {
    double lo = -0.8, hi = 0.8;
    auto val = [&](double yn) { return rho_lin({{cplx(x1, y1), cplx(x2, yn)}}); };
    double flo = val(lo), fhi = val(hi);
    if ((flo > 0) == (fhi > 0)) return std::numeric_limits<double>::quiet_NaN();
    for (int it = 0; it < 70; ++it) {
      double mid = 0.5 * (lo + hi);
      double fm = val(mid);
      if ((fm > 0) == (flo > 0)) { lo = mid; flo = fm; }
      else hi = mid;
    }
    return 0.5 * (lo + hi);
  };

  // least squares for y_n ~ quadratic(v); sample radius small around 0
  const int NS = 120;
  std::vector<std::array<double, 3>> vs;
  std::vector<double> ys;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> uni(-0.15, 0.15);
  while (int(vs.size()) < NS) {
    double x1 = uni(rng), y1 = uni(rng), x2 = uni(rng);
    double yn = graph_yn(x1, y1, x2);
    if (std::isnan(yn) || std::abs(yn) > 0.4) continue;
    vs.push_back({x1, y1, x2});
    ys.push_back(yn);
  }
  // basis: 1, x1, y1, x2, x1^2, y1^2, x2^2, x1 y1, x1 x2, y1 x2
  auto basis = [](const std::array<double, 3>& v, double* b) {
    b[0] = 1;
    b[1] = v[0];
    b[2] = v[1];
    b[3] = v[2];
    b[4] = v[0] * v[0];
    b[5] = v[1] * v[1];
    b[6] = v[2] * v[2];
    b[7] = v[0] * v[1];
    b[8] = v[0] * v[2];
    b[9] = v[1] * v[2];
  };
  double AtA[10][10] = {}, Atb[10] = {};
  for (int i = 0; i < NS; ++i) {
    double b[10];
    basis(vs[std::size_t(i)], b);
    for (int r = 0; r < 10; ++r) {
      Atb[r] += b[r] * ys[std::size_t(i)];
      for (int c = 0; c < 10; ++c) AtA[r][c] += b[r] * b[c];
    }
  }
  // solve 10x10 by Gaussian elimination
  double q[10];
  {
    double M[10][11];
    for (int r = 0; r < 10; ++r) {
      for (int c = 0; c < 10; ++c) M[r][c] = AtA[r][c];
      M[r][10] = Atb[r];
    }
    for (int c = 0; c < 10; ++c) {
      int piv = c;
      for (int r = c + 1; r < 10; ++r)
        if (std::abs(M[r][c]) > std::abs(M[piv][c])) piv = r;
      require(std::abs(M[piv][c]) > 1e-12, "boundary_normal_form: quadratic fit singular");
      std::swap_ranges(M[c], M[c] + 11, M[piv]);
      for (int r = 0; r < 10; ++r) {
        if (r == c) continue;
        double f = M[r][c] / M[c][c];
        for (int cc = c; cc < 11; ++cc) M[r][cc] -= f * M[c][cc];
      }
    }
    for (int r = 0; r < 10; ++r) q[r] = M[r][10] / M[r][r];
  }

  // quadratic part of y_n as a complex form in (z1, z2 -> x2 on the graph):
  //   y_n = a11 |z1|^2 + 2 Re(b11 z1^2 + c1 z1 x2) + c2 x2^2 + (linear) + o(2)
  // with z1 = x1 + i y1:
  //   |z1|^2 = x1^2 + y1^2, Re z1^2 = x1^2 - y1^2, Im z1^2 = 2 x1 y1
  // match: q4 x1^2 + q5 y1^2 + q7 x1 y1 -> a11 (q4+q5)/2-ish; solve:
  double a11 = 0.5 * (q[4] + q[5]);
  cplx b11 = cplx(0.25 * (q[4] - q[5]), 0.25 * q[7]);  // 2Re(b11 z1^2)
  cplx c1 = cplx(0.5 * q[8], 0.5 * q[9]);              // 2Re(c1 z1) x2
  double c2 = q[6];                                    // x2^2

  require(a11 > 0,
          "boundary_normal_form: tangential Hermitian form not positive definite");

  // (3) holomorphic quadratic change z2 -> z2 - i Q(z), Q chosen so that
  // -Im(z2) + y_n-quadratics lose the pluriharmonic part:
  //   new rho = -y2 + Re(Q) + [a11|z1|^2 + 2Re(b11 z1^2) + 2Re(c1 z1) x2 + c2 x2^2]
  // kill 2Re(b11 z1^2) with Q += -2 b11 z1^2
  // kill 2Re(c1 z1) x2 with Q += -2 c1 z1 z2   (x2 = Re z2 on the graph)
  // kill c2 x2^2      with Q += -c2 z2^2       (Re z2^2 = x2^2 - y2^2, y2 = O(2))
  cplx Q11 = -2.0 * b11, Q12 = -2.0 * c1;
  cplx Q22 = -cplx(c2, 0);
  auto quad = [Q11, Q12, Q22](const C2& zeta) -> C2 {
    cplx Q = Q11 * zeta[0] * zeta[0] + Q12 * zeta[0] * zeta[1] + Q22 * zeta[1] * zeta[1];
    return {zeta[0], zeta[1] - cplx(0, 1) * Q};
  };
  auto quad_inv = [Q11, Q12, Q22](const C2& w) -> C2 {
    // fixed point: zeta2 = w2 + i Q(zeta1 = w1, zeta2)
    cplx z2 = w[1];
    for (int it = 0; it < 60; ++it) {
      cplx Q = Q11 * w[0] * w[0] + Q12 * w[0] * z2 + Q22 * z2 * z2;
      cplx nz2 = w[1] + cplx(0, 1) * Q;
      if (std::abs(nz2 - z2) < 1e-14) { z2 = nz2; break; }
      z2 = nz2;
    }
    return {w[0], z2};
  };

  // (4) diagonalize the tangential part: z1 -> sqrt(a11) z1
  double s1 = std::sqrt(a11);
  BoundaryNormalForm out;
  out.forward = [lin, quad, s1](const C2& z) -> C2 {
    C2 zeta = quad(lin(z));
    return {s1 * zeta[0], zeta[1]};
  };
  auto backward = [lin_inv, quad_inv, s1](const C2& w) -> C2 {
    C2 zeta = {w[0] / s1, w[1]};
    return lin_inv(quad_inv(zeta));
  };

  GridSpec nf_box = GridSpec::cube(0.9, 9);
  auto rho_new_f = [rho, backward](const Vec4& xw) {
    C2 z = backward(to_complex(xw));
    return rho->rho(to_real(z));
  };
  // scale-invariant seed: slightly inside along +y2
  out.rho_new = std::make_shared<ClosedFormRho>(nf_box, rho_new_f, Vec4{0, 0, 0, 0.15});

  out.h = [rho_new_f](cplx z1, double x2) {
    // solve rho_new(z1, x2 + i y2) = 0 for y2; h = y2 - |z1|^2
    double lo = -0.8, hi = 0.8;
    auto val = [&](double y2) {
      return rho_new_f({z1.real(), z1.imag(), x2, y2});
    };
    double flo = val(lo);
    for (int it = 0; it < 70; ++it) {
      double mid = 0.5 * (lo + hi);
      if ((val(mid) > 0) == (flo > 0)) { lo = mid; flo = val(mid); }
      else hi = mid;
    }
    return 0.5 * (lo + hi) - std::norm(z1);
  };

  // fitted vanishing order of h on shrinking balls
  std::vector<double> radii = {0.1, 0.2, 0.4};
  std::vector<double> hs;
  std::mt19937_64 rng2(99);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (double r : radii) {
    double m = 0;
    for (int i = 0; i < 60; ++i) {
      cplx z1 = r * cplx(unit(rng2), unit(rng2)) * 0.7;
      double x2 = 0.7 * r * unit(rng2);
      m = std::max(m, std::abs(out.h(z1, x2)));
    }
    hs.push_back(std::max(m, 1e-14));
  }
  out.h_order_fit = fit_loglog_slope(radii, hs);
  (void)A;
  return out;
}

DilatedStructure anisotropic_dilate(const Structure& A, double eps,
                                    const GridSpec& out_spec,
                                    const std::vector<std::uint8_t>& out_mask) {
  require(eps > 0 && eps <= 1.0, "anisotropic_dilate: eps in (0, 1]");
  DilatedStructure out;
  out.eps = eps;
  out.A_eps.A = GridFunction(out_spec, Rank::Matrix);
  out.A_eps.A.set_mask(out_mask);
  auto weight = [&](int a, int b) {
    double wa = (a == kNC - 1) ? 2.0 : 1.0;
    double wb = (b == kNC - 1) ? 2.0 : 1.0;
    return std::pow(eps, wa - wb);
  };
  for (std::size_t k = 0; k < out_spec.node_count(); ++k) {
    if (!out_mask[k]) continue;
    Vec4 x = out_spec.coord(out_spec.unflat(k));
    C2 z = to_complex(x);
    C2 src = {eps * z[0], eps * eps * z[1]};
    Vec4 sx = to_real(src);
    for (int a = 0; a < kNC; ++a)
      for (int b = 0; b < kNC; ++b) {
        cplx v = interp_masked(A.A, a * kNC + b, sx, 2);
        out.A_eps.A.at(k, a * kNC + b) = weight(a, b) * v;
      }
  }
  out.A_eps.A.seal_mask();
  double guard = out.A_eps.sup();
  require(guard < 1.0 / (2 * kNC),
          "anisotropic_dilate: eps-weighted entries exceed the amplitude guard "
          "(A is not o(|z|) enough)");
  return out;
}

}  // namespace acs
