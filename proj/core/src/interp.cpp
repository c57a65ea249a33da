#include "acs/interp.hpp"

#include <Eigen/Dense>

namespace acs {

namespace {

// 1-D Lagrange weights for `deg+1` consecutive nodes starting at base,
// evaluated at local coordinate s (in units of h, relative to base).
void lagrange_weights(int deg, double s, double* w) {
  for (int i = 0; i <= deg; ++i) {
    double v = 1;
    for (int j = 0; j <= deg; ++j)
      if (j != i) v *= (s - j) / double(i - j);
    w[i] = v;
  }
}

void lagrange_dweights(int deg, double s, double* w) {
  for (int i = 0; i <= deg; ++i) {
    double sum = 0;
    for (int k = 0; k <= deg; ++k) {
      if (k == i) continue;
      double v = 1.0 / double(i - k);
      for (int j = 0; j <= deg; ++j)
        if (j != i && j != k) v *= (s - j) / double(i - j);
      sum += v;
    }
    w[i] = sum;
  }
}

struct TensorBase {
  Idx4 base{};
  double s[kND];
  bool outside = false;
};

TensorBase locate(const GridSpec& sp, const Vec4& x, int deg) {
  TensorBase tb;
  for (int a = 0; a < kND; ++a) {
    double h = sp.h(a);
    double t = (x[a] - sp.lower[a]) / h;
    if (t < -1e-9 || t > sp.npts[a] - 1 + 1e-9) tb.outside = true;
    int b = int(std::floor(t)) - deg / 2;
    b = std::max(0, std::min(b, sp.npts[a] - 1 - deg));
    tb.base[a] = b;
    tb.s[a] = t - b;
  }
  return tb;
}

}  // namespace

cplx interp_lagrange(const GridFunction& u, int comp, const Vec4& x,
                     int degree, bool zero_outside) {
  const GridSpec& sp = u.spec();
  TensorBase tb = locate(sp, x, degree);
  if (tb.outside && zero_outside) return {0, 0};
  double w[kND][5];
  for (int a = 0; a < kND; ++a) lagrange_weights(degree, tb.s[a], w[a]);
  cplx acc(0, 0);
  Idx4 i;
  for (int i0 = 0; i0 <= degree; ++i0) {
    i[0] = tb.base[0] + i0;
    for (int i1 = 0; i1 <= degree; ++i1) {
      i[1] = tb.base[1] + i1;
      double w01 = w[0][i0] * w[1][i1];
      for (int i2 = 0; i2 <= degree; ++i2) {
        i[2] = tb.base[2] + i2;
        double w012 = w01 * w[2][i2];
        for (int i3 = 0; i3 <= degree; ++i3) {
          i[3] = tb.base[3] + i3;
          acc += (w012 * w[3][i3]) * u.at(i, comp);
        }
      }
    }
  }
  return acc;
}

cplx interp_lagrange_deriv(const GridFunction& u, int comp, const Vec4& x,
                           int axis, int degree, bool zero_outside) {
  const GridSpec& sp = u.spec();
  TensorBase tb = locate(sp, x, degree);
  if (tb.outside && zero_outside) return {0, 0};
  double w[kND][5];
  for (int a = 0; a < kND; ++a) {
    if (a == axis)
      lagrange_dweights(degree, tb.s[a], w[a]);
    else
      lagrange_weights(degree, tb.s[a], w[a]);
  }
  cplx acc(0, 0);
  Idx4 i;
  for (int i0 = 0; i0 <= degree; ++i0) {
    i[0] = tb.base[0] + i0;
    for (int i1 = 0; i1 <= degree; ++i1) {
      i[1] = tb.base[1] + i1;
      double w01 = w[0][i0] * w[1][i1];
      for (int i2 = 0; i2 <= degree; ++i2) {
        i[2] = tb.base[2] + i2;
        double w012 = w01 * w[2][i2];
        for (int i3 = 0; i3 <= degree; ++i3) {
          i[3] = tb.base[3] + i3;
          acc += (w012 * w[3][i3]) * u.at(i, comp);
        }
      }
    }
  }
  return acc / sp.h(axis);
}

MlsInterpolator::MlsInterpolator(std::vector<Vec4> points, std::vector<cplx> values,
                                 double radius)
    : pts_(std::move(points)), vals_(std::move(values)), radius_(radius) {
  require(pts_.size() == vals_.size() && !pts_.empty(), "MLS: empty sample set");
  lo_ = pts_[0]; hi_ = pts_[0];
  for (const auto& p : pts_)
    for (int a = 0; a < kND; ++a) {
      lo_[a] = std::min(lo_[a], p[a]);
      hi_[a] = std::max(hi_[a], p[a]);
    }
  cell_ = radius_;
  std::size_t total = 1;
  for (int a = 0; a < kND; ++a) {
    nbins_[a] = std::max(1, int((hi_[a] - lo_[a]) / cell_) + 1);
    total *= std::size_t(nbins_[a]);
  }
  bins_.resize(total);
  for (std::size_t i = 0; i < pts_.size(); ++i) bins_[bin_of(pts_[i])].push_back(int(i));
}

std::size_t MlsInterpolator::bin_of(const Vec4& x) const {
  std::size_t k = 0;
  for (int a = 0; a < kND; ++a) {
    int b = int((x[a] - lo_[a]) / cell_);
    b = std::max(0, std::min(b, nbins_[a] - 1));
    k = k * std::size_t(nbins_[a]) + std::size_t(b);
  }
  return k;
}

void MlsInterpolator::neighbors(const Vec4& x, double R, std::vector<int>& out) const {
  out.clear();
  int b0[kND], b1[kND];
  for (int a = 0; a < kND; ++a) {
    b0[a] = std::max(0, int((x[a] - R - lo_[a]) / cell_));
    b1[a] = std::min(nbins_[a] - 1, int((x[a] + R - lo_[a]) / cell_));
  }
  double R2 = R * R;
  for (int i0 = b0[0]; i0 <= b1[0]; ++i0)
    for (int i1 = b0[1]; i1 <= b1[1]; ++i1)
      for (int i2 = b0[2]; i2 <= b1[2]; ++i2)
        for (int i3 = b0[3]; i3 <= b1[3]; ++i3) {
          std::size_t k = ((std::size_t(i0) * nbins_[1] + i1) * nbins_[2] + i2) *
                              std::size_t(nbins_[3]) + std::size_t(i3);
          for (int idx : bins_[k]) {
            Vec4 d = pts_[std::size_t(idx)] - x;
            if (dot(d, d) <= R2) out.push_back(idx);
          }
        }
}

cplx MlsInterpolator::eval(const Vec4& x) const {
  static constexpr int kBasis = 1 + kND + kND * (kND + 1) / 2;  // deg-2 in R^4
  std::vector<int> nb;
  double R = radius_;
  for (int tries = 0; tries < 6; ++tries) {
    neighbors(x, R, nb);
    if (nb.size() >= std::size_t(kBasis + 5)) break;
    R *= 1.5;
  }
  require(nb.size() >= 6, "MLS: too few neighbors near query point");

  Eigen::MatrixXd AtA = Eigen::MatrixXd::Zero(kBasis, kBasis);
  Eigen::VectorXcd Atb = Eigen::VectorXcd::Zero(kBasis);
  double basis[kBasis];
  for (int idx : nb) {
    Vec4 d = pts_[std::size_t(idx)] - x;
    double r = norm2(d) / R;
    double t = std::max(0.0, 1.0 - r);
    double wgt = t * t * t * t * (4.0 * r + 1.0);  // Wendland C2
    int c = 0;
    basis[c++] = 1.0;
    for (int a = 0; a < kND; ++a) basis[c++] = d[a];
    for (int a = 0; a < kND; ++a)
      for (int b = a; b < kND; ++b) basis[c++] = d[a] * d[b];
    for (int i = 0; i < kBasis; ++i) {
      for (int j = 0; j < kBasis; ++j) AtA(i, j) += wgt * basis[i] * basis[j];
      Atb(i) += wgt * basis[i] * vals_[std::size_t(idx)];
    }
  }
  // mild ridge keeps degenerate neighborhoods solvable
  for (int i = 0; i < kBasis; ++i) AtA(i, i) += 1e-12 * (1.0 + AtA(i, i));
  Eigen::VectorXcd sol = AtA.ldlt().solve(Atb);
  return sol(0);
}

cplx interp_masked(const GridFunction& u, int comp, const Vec4& x, int degree) {
  const GridSpec& sp = u.spec();
  if (!u.has_mask()) return interp_lagrange(u, comp, x, degree);
  TensorBase tb = locate(sp, x, degree);
  bool ok = true;
  Idx4 i;
  for (int i0 = 0; i0 <= degree && ok; ++i0)
    for (int i1 = 0; i1 <= degree && ok; ++i1)
      for (int i2 = 0; i2 <= degree && ok; ++i2)
        for (int i3 = 0; i3 <= degree && ok; ++i3) {
          i = {tb.base[0] + i0, tb.base[1] + i1, tb.base[2] + i2, tb.base[3] + i3};
          if (!u.in_mask(sp.flat(i))) ok = false;
        }
  if (ok) return interp_lagrange(u, comp, x, degree);

  // fall back to MLS over in-mask nodes near x
  double R = 2.5 * sp.h_max();
  std::vector<Vec4> pts;
  std::vector<cplx> vals;
  for (int tries = 0; tries < 5; ++tries) {
    pts.clear(); vals.clear();
    Idx4 lo, hi;
    for (int a = 0; a < kND; ++a) {
      lo[a] = std::max(0, int((x[a] - R - sp.lower[a]) / sp.h(a)));
      hi[a] = std::min(sp.npts[a] - 1, int((x[a] + R - sp.lower[a]) / sp.h(a)) + 1);
    }
    for (i[0] = lo[0]; i[0] <= hi[0]; ++i[0])
      for (i[1] = lo[1]; i[1] <= hi[1]; ++i[1])
        for (i[2] = lo[2]; i[2] <= hi[2]; ++i[2])
          for (i[3] = lo[3]; i[3] <= hi[3]; ++i[3]) {
            std::size_t k = sp.flat(i);
            if (!u.in_mask(k)) continue;
            Vec4 p = sp.coord(i);
            Vec4 d = p - x;
            if (dot(d, d) <= R * R) { pts.push_back(p); vals.push_back(u.at(k, comp)); }
          }
    if (pts.size() >= 20) break;
    R *= 1.5;
  }
  require(!pts.empty(), "interp_masked: no in-mask nodes near query point");
  MlsInterpolator mls(std::move(pts), std::move(vals), R);
  return mls.eval(x);
}

}  // namespace acs
