#pragma once

#include "acs/grid.hpp"

namespace acs {

enum class NormMethod { FiniteDifference, Dyadic };

// Holder-Zygmund norm estimate: sup term plus second-difference seminorm,
// with the offset attaining the sampled sup. For r > 1 the estimator recurses
// on first derivatives and the seminorm aggregates the subordinate levels.
struct ZygmundReport {
  double order = 0;
  double sup = 0;        // sup |u|
  double seminorm = 0;   // total - sup
  double total = 0;
  Idx4 witness{};        // offset multi-index attaining the sampled sup
  NormMethod method = NormMethod::FiniteDifference;
};

// Offsets y = (m0 h0, ..., m3 h3) with integer entries, |y| bounded by a
// quarter of the box width. Fixed per spec so inter-step ledger comparisons
// are like-for-like.
struct OffsetSet {
  std::vector<Idx4> offsets;
  static OffsetSet standard(const GridSpec& spec);
};

ZygmundReport zygmund_norm(const GridFunction& u, double r,
                           NormMethod method = NormMethod::FiniteDifference,
                           const OffsetSet* offsets = nullptr);

// Convenience: the total only.
double znorm(const GridFunction& u, double r,
             NormMethod method = NormMethod::FiniteDifference);

// Convexity check |u|_{(1-th)a+th b} <= C |u|_a^{1-th} |u|_b^th.
struct InterpolationReport {
  double lhs = 0;   // |u| at the interpolated order
  double rhs = 0;   // product of powers
  double ratio = 0;
  bool violation = false;
};
InterpolationReport interpolation_check(const GridFunction& u, double a, double b,
                                        double theta, double c_ab = 0.0);

// Product inequality |uv|_a <= C(|u|_a |v|_0 + |u|_0 |v|_a); returns the
// realized ratio for one pair.
double product_ratio(const GridFunction& u, const GridFunction& v, double a);

// Chain inequality |u o g|_a <= C(C_eps |u|_a |g|_{1+eps}^{1/(1+eps)}
//                                 + |u|_1 |g|_a + |u|_0), a > 1.
// g is a map field sampled on u's grid (rank Covector = components of g).
double chain_ratio(const GridFunction& u, const GridFunction& g_components,
                   const GridFunction& u_of_g, double a, double eps = 0.25);

}  // namespace acs
