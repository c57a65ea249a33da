#include "acs/zygmund.hpp"

#include <map>

#include "acs/mollifier.hpp"
#include "acs/stencil.hpp"

namespace acs {

OffsetSet OffsetSet::standard(const GridSpec& spec) {
  OffsetSet s;
  double quarter = 0;
  for (int a = 0; a < kND; ++a) quarter = std::max(quarter, (spec.upper[a] - spec.lower[a]) / 4.0);
  int mmax = 0;
  for (int a = 0; a < kND; ++a)
    mmax = std::max(mmax, int(quarter / spec.h(a)));
  mmax = std::min(mmax, 6);
  for (int m0 = -mmax; m0 <= mmax; ++m0)
    for (int m1 = -mmax; m1 <= mmax; ++m1)
      for (int m2 = -mmax; m2 <= mmax; ++m2)
        for (int m3 = -mmax; m3 <= mmax; ++m3) {
          if (m0 == 0 && m1 == 0 && m2 == 0 && m3 == 0) continue;
          // canonical representative: skip the negation duplicate
          if (m0 < 0 || (m0 == 0 && (m1 < 0 || (m1 == 0 && (m2 < 0 || (m2 == 0 && m3 < 0))))))
            continue;
          // keep axis-aligned offsets of any length; mixed offsets up to 2 steps
          int nz = (m0 != 0) + (m1 != 0) + (m2 != 0) + (m3 != 0);
          int amax = std::max({std::abs(m0), std::abs(m1), std::abs(m2), std::abs(m3)});
          if (nz > 1 && amax > 2) continue;
          Vec4 y = {m0 * spec.h(0), m1 * spec.h(1), m2 * spec.h(2), m3 * spec.h(3)};
          if (norm2(y) > quarter) continue;
          s.offsets.push_back({m0, m1, m2, m3});
        }
  return s;
}

namespace {

// Second-difference seminorm at order rr in (0,1]: sampled sup over offsets
// of |u(x+2y)+u(x)-2u(x+y)| / |y|^rr, restricted to in-mask triples.
struct SemiResult {
  double value = 0;
  Idx4 witness{};
  bool any_triple = false;
};

SemiResult second_diff_semi(const GridFunction& u, double rr, const OffsetSet& offs) {
  const GridSpec& sp = u.spec();
  SemiResult best;
  std::vector<double> vals(offs.offsets.size(), -1.0);
  parallel_for(offs.offsets.size(), [&](std::size_t oi) {
    const Idx4& m = offs.offsets[oi];
    Vec4 y = {m[0] * sp.h(0), m[1] * sp.h(1), m[2] * sp.h(2), m[3] * sp.h(3)};
    double ylen = norm2(y);
    double denom = std::pow(ylen, rr);
    double vmax = -1.0;
    // iterate nodes where x, x+y, x+2y all exist
    Idx4 lo{}, hi{};
    for (int a = 0; a < kND; ++a) {
      lo[a] = std::max(0, -2 * m[a]);
      hi[a] = std::min(sp.npts[a] - 1, sp.npts[a] - 1 - 2 * m[a]);
    }
    Idx4 i;
    for (i[0] = lo[0]; i[0] <= hi[0]; ++i[0])
      for (i[1] = lo[1]; i[1] <= hi[1]; ++i[1])
        for (i[2] = lo[2]; i[2] <= hi[2]; ++i[2])
          for (i[3] = lo[3]; i[3] <= hi[3]; ++i[3]) {
            std::size_t k0 = sp.flat(i);
            Idx4 i1 = {i[0] + m[0], i[1] + m[1], i[2] + m[2], i[3] + m[3]};
            Idx4 i2 = {i[0] + 2 * m[0], i[1] + 2 * m[1], i[2] + 2 * m[2], i[3] + 2 * m[3]};
            std::size_t k1 = sp.flat(i1), k2 = sp.flat(i2);
            if (!u.in_mask(k0) || !u.in_mask(k1) || !u.in_mask(k2)) continue;
            for (int c = 0; c < u.mult(); ++c) {
              double v = std::abs(u.at(k2, c) + u.at(k0, c) - 2.0 * u.at(k1, c)) / denom;
              if (v > vmax) vmax = v;
            }
          }
    vals[oi] = vmax;
  });
  for (std::size_t oi = 0; oi < vals.size(); ++oi) {
    if (vals[oi] >= 0) {
      best.any_triple = true;
      if (vals[oi] > best.value) {
        best.value = vals[oi];
        best.witness = offs.offsets[oi];
      }
    }
  }
  return best;
}

// Derivative fields are memoized by symmetric multi-index so the r > 1
// recursion costs O(#distinct multisets), not O(4^depth).
struct DerivCache {
  const GridFunction* base;
  std::map<Idx4, GridFunction> fields;

  const GridFunction& get(const Idx4& mi) {
    if (mi == Idx4{0, 0, 0, 0}) return *base;
    auto it = fields.find(mi);
    if (it != fields.end()) return it->second;
    int axis = 0;
    while (mi[axis] == 0) ++axis;
    Idx4 parent = mi;
    parent[axis] -= 1;
    GridFunction d = real_partial(get(parent), axis);
    return fields.emplace(mi, std::move(d)).first->second;
  }
};

struct FdValue {
  double value = 0;  // |field|_{r at this level}
  Idx4 witness{};
};

FdValue fd_norm(DerivCache& cache, const Idx4& mi, double r, const OffsetSet& offs) {
  const GridFunction& u = cache.get(mi);
  FdValue out;
  double s = u.sup_abs();
  if (r <= 1.0) {
    SemiResult sr = second_diff_semi(u, r, offs);
    require(sr.any_triple, "zygmund_norm: mask too small for any second-difference triple");
    out.value = s + sr.value;
    out.witness = sr.witness;
    return out;
  }
  // |u|_r = |u|_0 + max_a |d_a u|_{r-1}
  FdValue best;
  for (int a = 0; a < kND; ++a) {
    Idx4 child = mi;
    child[a] += 1;
    FdValue sub = fd_norm(cache, child, r - 1.0, offs);
    if (sub.value > best.value) best = sub;
  }
  out.value = s + best.value;
  out.witness = best.witness;
  return out;
}

}  // namespace

ZygmundReport zygmund_norm(const GridFunction& u, double r, NormMethod method,
                           const OffsetSet* offsets) {
  require(r > 0, "zygmund_norm: order must be positive");
  ZygmundReport rep;
  rep.order = r;
  rep.method = method;
  if (method == NormMethod::FiniteDifference) {
    OffsetSet local;
    if (!offsets) {
      local = OffsetSet::standard(u.spec());
      offsets = &local;
    }
    // norm of a covector/matrix field is the max over components
    double best = -1.0;
    for (int c = 0; c < u.mult(); ++c) {
      GridFunction uc = u.mult() == 1 ? u : u.component(c);
      DerivCache cache{&uc, {}};
      FdValue v = fd_norm(cache, {0, 0, 0, 0}, r, *offsets);
      if (v.value > best) {
        best = v.value;
        rep.sup = uc.sup_abs();
        rep.total = v.value;
        rep.witness = v.witness;
      }
    }
    rep.seminorm = rep.total - rep.sup;
    return rep;
  }

  // Dyadic method: mollify at scales t_k = t0 2^{-k} and report the smallest
  // A with |d^i u_k| <= A 2^{k(i-r)} for i = 0..[r]+1 (Littlewood-Paley style
  // characterization, evaluated per component).
  const Mollifier& m = plain_mollifier();
  const double t0 = 0.2;
  const int imax = int(std::floor(r)) + 1;
  const int K = 3;
  double A = 0;
  Idx4 wit{};
  for (int c = 0; c < u.mult(); ++c) {
    GridFunction uc = u.mult() == 1 ? u : u.component(c);
    for (int k = 0; k <= K; ++k) {
      double t = t0 * std::pow(2.0, -k);
      GridFunction cur = smooth_field(uc, t, m, /*interp_degree=*/2, /*compact=*/false);
      for (int i = 0; i <= imax; ++i) {
        double bound = cur.sup_abs() / std::pow(2.0, k * (i - r));
        if (bound > A) { A = bound; wit = {k, i, 0, 0}; }
        if (i < imax) {
          double best = -1.0;
          GridFunction next;
          for (int a = 0; a < kND; ++a) {
            GridFunction da = real_partial(cur, a);
            double sa = da.sup_abs();
            if (sa > best) { best = sa; next = std::move(da); }
          }
          cur = std::move(next);
        }
      }
    }
  }
  rep.sup = u.sup_abs();
  rep.total = A + rep.sup;
  rep.seminorm = A;
  rep.witness = wit;
  return rep;
}

double znorm(const GridFunction& u, double r, NormMethod method) {
  return zygmund_norm(u, r, method).total;
}

InterpolationReport interpolation_check(const GridFunction& u, double a, double b,
                                        double theta, double c_ab) {
  require(a > 0 && b > a, "interpolation_check: need 0 < a < b");
  require(theta > 0 && theta < 1,
          "interpolation_check: theta in {0,1} is degenerate (identity case)");
  double mid = (1 - theta) * a + theta * b;
  InterpolationReport rep;
  rep.lhs = znorm(u, mid);
  rep.rhs = std::pow(znorm(u, a), 1 - theta) * std::pow(znorm(u, b), theta);
  rep.ratio = rep.rhs > 0 ? rep.lhs / rep.rhs : 0.0;
  if (c_ab > 0) rep.violation = rep.ratio > c_ab;
  return rep;
}

double product_ratio(const GridFunction& u, const GridFunction& v, double a) {
  require(u.spec() == v.spec(), "product_ratio: grid mismatch");
  GridFunction uv(u.spec(), Rank::Scalar);
  std::vector<std::uint8_t> mask(u.nodes(), 1);
  bool masked = u.has_mask() || v.has_mask();
  for (std::size_t k = 0; k < u.nodes(); ++k) {
    bool in = u.in_mask(k) && v.in_mask(k);
    mask[k] = in ? 1 : 0;
    if (in) uv.at(k) = u.at(k) * v.at(k);
  }
  if (masked) { uv.set_mask(std::move(mask)); uv.seal_mask(); }
  double lhs = znorm(uv, a);
  double u0 = u.sup_abs(), v0 = v.sup_abs();  // |.|_0 is the sup norm
  double rhs = znorm(u, a) * v0 + u0 * znorm(v, a);
  return rhs > 0 ? lhs / rhs : 0.0;
}

double chain_ratio(const GridFunction& u, const GridFunction& g_components,
                   const GridFunction& u_of_g, double a, double eps) {
  require(a > 1, "chain_ratio: needs a > 1");
  double lhs = znorm(u_of_g, a);
  double ga = znorm(g_components, a);
  double g1e = znorm(g_components, 1 + eps);
  double ua = znorm(u, a);
  double u1 = znorm(u, 1.0);
  double u0 = u.sup_abs();
  double rhs = ua * std::pow(g1e, 1.0 / (1.0 + eps)) + u1 * ga + u0;
  return rhs > 0 ? lhs / rhs : 0.0;
}

}  // namespace acs
