#include <doctest.h>

#include <cstdio>
#include <sstream>

#include "acs/grid.hpp"
#include "acs/stencil.hpp"

using namespace acs;

namespace {
GridFunction coord_z1(const GridSpec& sp) {
  return make_grid_scalar(sp, [](const Vec4& x) { return to_complex(x)[0]; });
}
}  // namespace

TEST_CASE("make_grid samples the coordinate function") {
  GridSpec sp = GridSpec::cube(1.0, 5);
  GridFunction u = coord_z1(sp);
  for (std::size_t k = 0; k < u.nodes(); ++k) {
    Vec4 x = sp.coord(sp.unflat(k));
    CHECK(u.at(k) == cplx(x[0], x[1]));
  }
}

TEST_CASE("make_grid zero field and corner values of |z|^2") {
  GridSpec sp5 = GridSpec::cube(1.0, 5);
  GridFunction z = make_grid_scalar(sp5, [](const Vec4&) { return cplx(0, 0); });
  CHECK(z.sup_abs() == 0.0);

  GridSpec sp9 = GridSpec::cube(1.4, 9);
  GridFunction u = make_grid_scalar(sp9, [](const Vec4& x) { return cplx(dot(x, x), 0); });
  Idx4 center = {4, 4, 4, 4};
  CHECK(u.at(center) == cplx(0, 0));
  Idx4 corner = {0, 0, 0, 0};
  CHECK(u.at(corner).real() == doctest::Approx(4 * 1.4 * 1.4));
}

TEST_CASE("make_grid rejects non-finite samples with coordinates") {
  GridSpec sp = GridSpec::cube(1.0, 5);
  CHECK_THROWS_WITH_AS(
      make_grid_scalar(sp,
                       [](const Vec4& x) {
                         return x[0] > 0.9 ? cplx(1.0 / 0.0, 0) : cplx(0, 0);
                       }),
      doctest::Contains("non-finite"), Error);
}

TEST_CASE("wirtinger: d/dz1 of z1^2 = 2 z1 (polynomial exactness)") {
  GridSpec sp = GridSpec::cube(1.0, 9);
  GridFunction u = make_grid_scalar(sp, [](const Vec4& x) {
    cplx z1 = to_complex(x)[0];
    return z1 * z1;
  });
  GridFunction d = wirtinger_derivative(u, 0, false);
  double err = 0;
  for (std::size_t k = 0; k < d.nodes(); ++k) {
    cplx z1 = to_complex(sp.coord(sp.unflat(k)))[0];
    err = std::max(err, std::abs(d.at(k) - 2.0 * z1));
  }
  CHECK(err < 1e-12);
}

TEST_CASE("wirtinger: dbar_2 zbar2 = 1 and dbar_1 |z1|^2 = z1") {
  GridSpec sp = GridSpec::cube(1.0, 9);
  GridFunction u = make_grid_scalar(sp, [](const Vec4& x) {
    return std::conj(to_complex(x)[1]);
  });
  GridFunction d = wirtinger_derivative(u, 1, true);
  for (std::size_t k = 0; k < d.nodes(); ++k)
    CHECK(std::abs(d.at(k) - cplx(1, 0)) < 1e-12);

  GridFunction v = make_grid_scalar(sp, [](const Vec4& x) {
    return cplx(std::norm(to_complex(x)[0]), 0);
  });
  GridFunction dv = wirtinger_derivative(v, 0, true);
  double err = 0;
  for (std::size_t k = 0; k < dv.nodes(); ++k)
    err = std::max(err, std::abs(dv.at(k) - to_complex(sp.coord(sp.unflat(k)))[0]));
  CHECK(err < 1e-12);

  // dbar of a holomorphic coordinate vanishes
  GridFunction w = coord_z1(sp);
  GridFunction dw = wirtinger_derivative(w, 0, true);
  CHECK(dw.sup_abs() < 1e-12);
}

TEST_CASE("derivative is linear, bitwise") {
  GridSpec sp = GridSpec::cube(1.0, 7);
  GridFunction u = make_grid_scalar(sp, [](const Vec4& x) {
    return cplx(std::sin(x[0]), std::cos(x[2]));
  });
  GridFunction v = make_grid_scalar(sp, [](const Vec4& x) {
    return cplx(x[1] * x[1], std::sin(x[3]));
  });
  cplx lam(3.0, 0.0);
  GridFunction lhs = wirtinger_derivative(axpy(lam, u, v), 0, false);
  GridFunction rhs = axpy(lam, wirtinger_derivative(u, 0, false),
                          wirtinger_derivative(v, 0, false));
  for (std::size_t k = 0; k < lhs.nodes(); ++k) CHECK(lhs.at(k) == rhs.at(k));
}

TEST_CASE("refinement: interior stencil converges at order 4") {
  auto err_at = [](int n) {
    GridSpec sp = GridSpec::cube(1.0, n);
    GridFunction u = make_grid_scalar(sp, [](const Vec4& x) {
      return cplx(std::sin(x[0]) * std::cos(x[3]), 0);
    });
    GridFunction d = real_partial(u, 0);
    // interior nodes only (centered stencils)
    double err = 0;
    for (std::size_t k = 0; k < d.nodes(); ++k) {
      Idx4 i = sp.unflat(k);
      bool interior = true;
      for (int a = 0; a < kND; ++a)
        if (i[a] < 2 || i[a] > sp.npts[a] - 3) interior = false;
      if (!interior) continue;
      Vec4 x = sp.coord(i);
      err = std::max(err, std::abs(d.at(k) - cplx(std::cos(x[0]) * std::cos(x[3]), 0)));
    }
    return err;
  };
  double e1 = err_at(9), e2 = err_at(17);
  // halving h gains about 2^4
  CHECK(e1 / e2 > 10.0);
}

TEST_CASE("mask too thin for a stencil is rejected with the node named") {
  GridSpec sp = GridSpec::cube(1.0, 7);
  GridFunction u = make_grid_scalar(sp, [](const Vec4&) { return cplx(1, 0); });
  std::vector<std::uint8_t> mask(u.nodes(), 0);
  // a 2-node run along axis 0
  Idx4 i0 = {3, 3, 3, 3}, i1 = {4, 3, 3, 3};
  mask[sp.flat(i0)] = 1;
  mask[sp.flat(i1)] = 1;
  u.set_mask(mask);
  u.seal_mask();
  CHECK_THROWS_WITH_AS(real_partial(u, 0), doctest::Contains("too thin"), Error);
}

TEST_CASE("binary dump round-trips bit-exactly") {
  GridSpec sp = GridSpec::cube(1.3, 5);
  GridFunction u = make_grid(sp, Rank::Covector, [](const Vec4& x, cplx* out) {
    out[0] = cplx(std::sin(3 * x[0]), x[1]);
    out[1] = cplx(x[2] * x[3], std::exp(x[0]));
  });
  std::vector<std::uint8_t> mask(u.nodes(), 1);
  mask[7] = 0;
  u.set_mask(mask);
  u.seal_mask();
  std::string path = "/tmp/acs_dump_test.grid";
  dump_binary(u, path);
  GridFunction v = load_binary(path);
  REQUIRE(v.spec() == u.spec());
  REQUIRE(v.rank() == u.rank());
  for (std::size_t k = 0; k < u.nodes(); ++k) {
    CHECK(v.in_mask(k) == u.in_mask(k));
    if (!u.in_mask(k)) continue;
    for (int c = 0; c < u.mult(); ++c) CHECK(v.at(k, c) == u.at(k, c));
  }
  std::remove(path.c_str());
}

TEST_CASE("csv dump has one record per node with documented columns") {
  GridSpec sp = GridSpec::cube(1.0, 5);
  GridFunction u = coord_z1(sp);
  std::ostringstream os;
  dump_csv(u, os);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  CHECK(header == "i0,i1,i2,i3,x0,x1,x2,x3,mask,re0,im0");
  std::size_t rows = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  CHECK(rows == sp.node_count());
}

TEST_CASE("rational arithmetic recovers exact square roots") {
  Rational xi(13, 4);
  Rational disc = xi * xi - Rational(2, 1) * xi - Rational::of(1);
  CHECK(disc.num == 49);
  CHECK(disc.den == 16);
  Rational root;
  REQUIRE(disc.try_sqrt(root));
  CHECK(root.num == 7);
  CHECK(root.den == 4);
}
