#include <doctest.h>

#include "acs/mollifier.hpp"
#include "acs/util.hpp"

using namespace acs;

TEST_CASE("mollifier moments vanish on the build quadrature (L = 1, 3, 5)") {
  for (int L : {1, 3, 5}) {
    Mollifier m = build_mollifier(L);
    CHECK(std::abs(m.moment({0, 0, 0, 0}) - 1.0) < 1e-10);
    for (int i0 = 0; i0 <= L; ++i0)
      for (int i1 = 0; i1 + i0 <= L; ++i1)
        for (int i2 = 0; i2 + i1 + i0 <= L; ++i2)
          for (int i3 = 0; i3 + i2 + i1 + i0 <= L; ++i3) {
            int tot = i0 + i1 + i2 + i3;
            if (tot < 1) continue;
            CHECK(std::abs(m.moment({i0, i1, i2, i3})) < 1e-10);
          }
  }
}

TEST_CASE("second moment for the smooth-branch order (L = 3)") {
  Mollifier m = build_mollifier(3);
  CHECK(std::abs(m.moment({2, 0, 0, 0})) < 1e-10);
}

TEST_CASE("S_t reproduces constants to 1e-10") {
  Mollifier m = build_mollifier(3);
  GridSpec sp = GridSpec::cube(1.0, 9);
  GridFunction u = make_grid_scalar(sp, [](const Vec4&) { return cplx(2.5, -1.0); });
  GridFunction s = smooth_field(u, 0.15, m, 4, false);
  double err = 0;
  for (std::size_t k = 0; k < s.nodes(); ++k) {
    if (!s.in_mask(k)) continue;
    err = std::max(err, std::abs(s.at(k) - cplx(2.5, -1.0)));
  }
  CHECK(s.mask_count() > 0);
  CHECK(err < 1e-10);
}

TEST_CASE("S_t with L = 5 reproduces x1^2 y2^2 at interior nodes") {
  Mollifier m = build_mollifier(5);
  GridSpec sp = GridSpec::cube(1.0, 9);
  GridFunction u = make_grid_scalar(sp, [](const Vec4& x) {
    return cplx(x[0] * x[0] * x[3] * x[3], 0);
  });
  GridFunction s = smooth_field(u, 0.12, m, 4, false);
  double err = 0;
  std::size_t checked = 0;
  for (std::size_t k = 0; k < s.nodes(); ++k) {
    if (!s.in_mask(k)) continue;
    Vec4 x = sp.coord(sp.unflat(k));
    err = std::max(err, std::abs(s.at(k) - cplx(x[0] * x[0] * x[3] * x[3], 0)));
    ++checked;
  }
  CHECK(checked > 0);
  CHECK(err < 1e-8);
}

TEST_CASE("smoothing error slope for L = 3 on cos(8 x1)") {
  Mollifier m = build_mollifier(3);
  // 1-D refined grid resolves the oscillation; the field only varies in x1
  GridSpec sp({-1.4, -0.2, -0.2, -0.2}, {1.4, 0.2, 0.2, 0.2}, {129, 5, 5, 5});
  GridFunction u = make_grid_scalar(sp, [](const Vec4& x) {
    return cplx(std::cos(8.0 * x[0]), 0);
  });
  std::vector<double> ts = {0.05, 0.07, 0.1, 0.14};
  std::vector<double> errs;
  for (double t : ts) {
    GridFunction s = smooth_field(u, t, m, 4, false);
    double e = 0;
    for (std::size_t k = 0; k < s.nodes(); ++k) {
      if (!s.in_mask(k)) continue;
      // stay where the x1-sampling cube is interior
      Vec4 x = sp.coord(sp.unflat(k));
      if (std::abs(x[0]) > 1.0) continue;
      e = std::max(e, std::abs(s.at(k) - u.at(k)));
    }
    errs.push_back(e);
  }
  double slope = fit_loglog_slope(ts, errs);
  MESSAGE("smoothing slope = ", slope, " errors ", errs[0], " ", errs[3]);
  CHECK(slope > 3.2);
  CHECK(slope < 4.8);
}

TEST_CASE("smooth() guards the range and flags under-resolution") {
  Mollifier m = build_mollifier(1);
  GridSpec sp = GridSpec::cube(1.0, 9);
  GridFunction u = make_grid_scalar(sp, [](const Vec4&) { return cplx(1, 0); });
  CHECK_THROWS_WITH_AS(smooth(u, 0.4, m, 0.25), doctest::Contains("too large"), Error);
  SmoothResult r = smooth(u, 0.05, m, 0.25, 2, false);
  CHECK(r.underresolved);  // h = 0.25, 2h > 0.05
}

TEST_CASE("S_t is linear (bitwise for integer scalings)") {
  Mollifier m = build_mollifier(1);
  GridSpec sp = GridSpec::cube(1.0, 7);
  GridFunction u = make_grid_scalar(sp, [](const Vec4& x) {
    return cplx(std::sin(x[0] + x[2]), std::cos(x[1]));
  });
  GridFunction u2 = scale(cplx(2, 0), u);
  GridFunction a = smooth_field(u, 0.1, m, 2, false);
  GridFunction b = smooth_field(u2, 0.1, m, 2, false);
  for (std::size_t k = 0; k < a.nodes(); ++k) {
    if (!a.in_mask(k)) continue;
    CHECK(b.at(k) == 2.0 * a.at(k));
  }
}
