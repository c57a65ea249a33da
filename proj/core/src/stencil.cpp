#include "acs/stencil.hpp"

#include <sstream>

namespace acs {

namespace {

// Differentiates one mask run [j0, j1] along `axis`; values accessed through
// idx(j) -> flat node. Centered order-4 inside, one-sided order-2 at the ends.
struct LineDiff {
  double h;
  int j0, j1;

  template <typename Get, typename Put>
  void run(const Get& g, const Put& put) const {
    int len = j1 - j0 + 1;
    for (int j = j0; j <= j1; ++j) {
      cplx d;
      if (j - 2 >= j0 && j + 2 <= j1) {
        d = (-g(j + 2) + 8.0 * g(j + 1) - 8.0 * g(j - 1) + g(j - 2)) / (12.0 * h);
      } else if (j == j0) {
        d = (-3.0 * g(j) + 4.0 * g(j + 1) - g(j + 2)) / (2.0 * h);
      } else if (j == j1) {
        d = (3.0 * g(j) - 4.0 * g(j - 1) + g(j - 2)) / (2.0 * h);
      } else {
        d = (g(j + 1) - g(j - 1)) / (2.0 * h);
      }
      put(j, d);
    }
    (void)len;
  }
};

}  // namespace

GridFunction real_partial(const GridFunction& u, int axis) {
  require(axis >= 0 && axis < kND, "real_partial: bad axis");
  const GridSpec& sp = u.spec();
  GridFunction out(sp, u.rank());
  if (u.has_mask()) out.set_mask(u.mask());
  const int m = u.mult();
  const int n_axis = sp.npts[axis];
  const double h = sp.h(axis);

  // enumerate lines along `axis`
  std::size_t n_lines = 1;
  for (int a = 0; a < kND; ++a)
    if (a != axis) n_lines *= std::size_t(sp.npts[a]);

  parallel_for(n_lines, [&](std::size_t line) {
    Idx4 base{};
    std::size_t t = line;
    for (int a = kND - 1; a >= 0; --a) {
      if (a == axis) continue;
      base[a] = int(t % std::size_t(sp.npts[a]));
      t /= std::size_t(sp.npts[a]);
    }
    // flat index helper along the line
    auto node_at = [&](int j) {
      Idx4 i = base;
      i[axis] = j;
      return sp.flat(i);
    };
    int j = 0;
    while (j < n_axis) {
      while (j < n_axis && !u.in_mask(node_at(j))) ++j;
      if (j >= n_axis) break;
      int j0 = j;
      while (j < n_axis && u.in_mask(node_at(j))) ++j;
      int j1 = j - 1;
      if (j1 - j0 + 1 < 3) {
        Idx4 i = base;
        i[axis] = j0;
        Vec4 x = sp.coord(i);
        std::ostringstream os;
        os << "real_partial: mask run too thin for a stencil at node ("
           << x[0] << ", " << x[1] << ", " << x[2] << ", " << x[3]
           << "), axis " << axis;
        fail(os.str());
      }
      LineDiff ld{h, j0, j1};
      for (int c = 0; c < m; ++c) {
        ld.run([&](int jj) { return u.at(node_at(jj), c); },
               [&](int jj, cplx d) { out.at(node_at(jj), c) = d; });
      }
    }
  });
  out.seal_mask();
  out.interior_order = 4;
  out.edge_order = 2;
  return out;
}

GridFunction wirtinger_derivative(const GridFunction& u, int alpha, bool conjugate) {
  require(alpha >= 0 && alpha < kNC, "wirtinger_derivative: bad complex axis");
  for (int a = 0; a < kND; ++a)
    require(u.spec().npts[a] >= 5, "wirtinger_derivative: need >= 5 points per axis");
  GridFunction dx = real_partial(u, 2 * alpha);
  GridFunction dy = real_partial(u, 2 * alpha + 1);
  const cplx iu = conjugate ? cplx(0, 0.5) : cplx(0, -0.5);
  GridFunction out = axpy(iu, dy, scale(0.5, dx));
  out.interior_order = dx.interior_order;
  out.edge_order = dx.edge_order;
  return out;
}

GridFunction dbar_coeff_01(const GridFunction& psi) {
  require(psi.rank() == Rank::Covector, "dbar_coeff_01: expects a (0,1)-form");
  GridFunction p1 = psi.component(0), p2 = psi.component(1);
  GridFunction a = wirtinger_derivative(p2, 0, true);
  GridFunction b = wirtinger_derivative(p1, 1, true);
  return axpy(cplx(-1, 0), b, a);
}

std::array<GridFunction, kND> gradient(const GridFunction& u) {
  return {real_partial(u, 0), real_partial(u, 1), real_partial(u, 2), real_partial(u, 3)};
}

double stencil_error(const GridFunction& u, int alpha, bool conjugate,
                     const std::function<cplx(const Vec4&)>& exact_deriv) {
  GridFunction d = wirtinger_derivative(u, alpha, conjugate);
  double m = 0;
  for (std::size_t k = 0; k < d.nodes(); ++k) {
    if (!d.in_mask(k)) continue;
    Vec4 x = d.spec().coord(d.spec().unflat(k));
    m = std::max(m, std::abs(d.at(k) - exact_deriv(x)));
  }
  return m;
}

}  // namespace acs
