#include "acs/maps.hpp"

#include "acs/interp.hpp"

namespace acs {

MapField MapField::identity(const GridSpec& spec) {
  MapField m;
  m.disp_ = GridFunction(spec, Rank::Covector);
  return m;
}

MapField MapField::from_closed_form(const GridSpec& spec, CEval f, CEval df_dz1,
                                    CEval df_dz2, CEval df_dz1bar, CEval df_dz2bar) {
  MapField m;
  m.cf_ = f;
  m.cf_dz_[0] = df_dz1;
  m.cf_dz_[1] = df_dz2;
  m.cf_dzb_[0] = df_dz1bar;
  m.cf_dzb_[1] = df_dz2bar;
  m.disp_ = make_grid(spec, Rank::Covector, [&](const Vec4& x, cplx* out) {
    C2 v = f(x);
    out[0] = v[0];
    out[1] = v[1];
  });
  return m;
}

MapField MapField::from_grid(GridFunction displacement) {
  require(displacement.rank() == Rank::Covector, "MapField: displacement must have 2 components");
  require(!displacement.has_mask(), "MapField: displacement must cover the whole box");
  MapField m;
  m.disp_ = std::move(displacement);
  return m;
}

C2 MapField::f(const Vec4& x) const {
  if (cf_) return cf_(x);
  return {interp_lagrange(disp_, 0, x, interp_degree),
          interp_lagrange(disp_, 1, x, interp_degree)};
}

C2 MapField::apply(const Vec4& x) const {
  C2 z = to_complex(x);
  C2 d = f(x);
  return {z[0] + d[0], z[1] + d[1]};
}

Vec4 MapField::apply_real(const Vec4& x) const { return to_real(apply(x)); }

void MapField::wirtinger(const Vec4& x, cplx dz[kNC][kNC], cplx dzb[kNC][kNC]) const {
  bool have_cf = cf_dz_[0] && cf_dz_[1] && cf_dzb_[0] && cf_dzb_[1];
  if (have_cf) {
    C2 d1 = cf_dz_[0](x), d2 = cf_dz_[1](x);
    C2 b1 = cf_dzb_[0](x), b2 = cf_dzb_[1](x);
    for (int b = 0; b < kNC; ++b) {
      dz[0][b] = d1[b];
      dz[1][b] = d2[b];
      dzb[0][b] = b1[b];
      dzb[1][b] = b2[b];
    }
    return;
  }
  for (int a = 0; a < kNC; ++a)
    for (int b = 0; b < kNC; ++b) {
      cplx dxv = interp_lagrange_deriv(disp_, b, x, 2 * a, interp_degree);
      cplx dyv = interp_lagrange_deriv(disp_, b, x, 2 * a + 1, interp_degree);
      dz[a][b] = 0.5 * (dxv - cplx(0, 1) * dyv);
      dzb[a][b] = 0.5 * (dxv + cplx(0, 1) * dyv);
    }
}

double MapField::sup_Df() const {
  double m = 0;
  const GridSpec& sp = disp_.spec();
  for (std::size_t k = 0; k < disp_.nodes(); ++k) {
    Idx4 i = sp.unflat(k);
    for (int a = 0; a < kND; ++a) {
      if (i[a] == 0 || i[a] == sp.npts[a] - 1) continue;
      Idx4 ip = i, im = i;
      ip[a] += 1;
      im[a] -= 1;
      for (int c = 0; c < kNC; ++c) {
        cplx d = (disp_.at(ip, c) - disp_.at(im, c)) / (2.0 * sp.h(a));
        m = std::max(m, std::abs(d));
      }
    }
  }
  return m;
}

MapField MapField::inverse() const {
  const GridSpec& sp = disp_.spec();
  GridFunction g(sp, Rank::Covector);
  parallel_for(disp_.nodes(), [&](std::size_t k) {
    Vec4 w = sp.coord(sp.unflat(k));
    C2 zw = to_complex(w);
    Vec4 x = w;
    int it = 0;
    for (; it < 200; ++it) {
      C2 fx = f(x);
      Vec4 xn = {zw[0].real() - fx[0].real(), zw[0].imag() - fx[0].imag(),
                 zw[1].real() - fx[1].real(), zw[1].imag() - fx[1].imag()};
      double d = norm2(xn - x);
      x = xn;
      if (d < 1e-12) break;
    }
    if (it >= 200) fail("MapField::inverse: fixed point did not converge in 200 sweeps");
    C2 zx = to_complex(x);
    g.at(k, 0) = zx[0] - zw[0];
    g.at(k, 1) = zx[1] - zw[1];
  });
  return MapField::from_grid(std::move(g));
}

MapField MapField::compose_after(const MapField& other) const {
  const GridSpec& sp = other.spec();
  GridFunction d(sp, Rank::Covector);
  parallel_for(d.nodes(), [&](std::size_t k) {
    Vec4 x = sp.coord(sp.unflat(k));
    C2 inner = other.f(x);
    Vec4 y = {x[0] + inner[0].real(), x[1] + inner[0].imag(),
              x[2] + inner[1].real(), x[3] + inner[1].imag()};
    C2 outer = f(y);
    d.at(k, 0) = inner[0] + outer[0];
    d.at(k, 1) = inner[1] + outer[1];
  });
  return MapField::from_grid(std::move(d));
}

}  // namespace acs
