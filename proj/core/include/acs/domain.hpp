#pragma once

#include <memory>

#include "acs/grid.hpp"
#include "acs/maps.hpp"

namespace acs {

// C^2 scalar defining function rho with derivative access. D = {rho < 0} is
// required to be nonempty and compactly contained in the box, with
// theta0 = dist(D, box boundary) > 0.
class DefiningFunction {
public:
  virtual ~DefiningFunction() = default;

  virtual double rho(const Vec4& x) const = 0;
  virtual Vec4 grad(const Vec4& x) const;                  // real gradient
  virtual void hessian(const Vec4& x, double H[kND][kND]) const;  // real Hessian

  const GridSpec& box() const { return box_; }
  double theta0() const { return theta0_; }
  double c2norm() const { return c2norm_; }

  // complex first derivatives (d rho / d z_alpha)
  C2 dz(const Vec4& x) const;
  // complex Hessian d^2 rho / dz_a dzbar_b (Hermitian part; fails beyond
  // symmetrization tolerance when check is set)
  void complex_hessian(const Vec4& x, cplx H[kNC][kNC], bool check = false) const;
  // holomorphic Hessian d^2 rho / dz_a dz_b
  void holo_hessian(const Vec4& x, cplx B[kNC][kNC]) const;

  std::vector<std::uint8_t> mask_on(const GridSpec& spec) const;
  bool inside(const Vec4& x) const { return rho(x) < 0; }

  // Recomputes theta0 and the sampled C2 norm; validates the invariants
  // (nonempty interior, containment, nonvanishing gradient on the boundary).
  void finalize(const Vec4& seed_interior);
  Vec4 interior_seed() const { return seed_; }

protected:
  GridSpec box_;
  double theta0_ = 0;
  double c2norm_ = 0;
  Vec4 seed_{};
  double fd_step_ = 1e-3;  // micro-stencil for derivative fallbacks
};

// Defining function given by closed-form evaluators. Gradient/Hessian
// evaluators are optional; finite differences are the fallback.
class ClosedFormRho : public DefiningFunction {
public:
  using FEval = std::function<double(const Vec4&)>;
  using GEval = std::function<Vec4(const Vec4&)>;
  using HEval = std::function<void(const Vec4&, double[kND][kND])>;

  ClosedFormRho(GridSpec box, FEval f, const Vec4& seed_interior,
                GEval g = nullptr, HEval h = nullptr);

  double rho(const Vec4& x) const override { return f_(x); }
  Vec4 grad(const Vec4& x) const override;
  void hessian(const Vec4& x, double H[kND][kND]) const override;

private:
  FEval f_;
  GEval g_;
  HEval h_;
};

// rho composed with an inverse map: rho_{j+1} = rho_j o G (raw mode), or the
// blended extension (chi * rho + (1 - chi)) o G that equals 1 away from D.
class TransportedRho : public DefiningFunction {
public:
  enum class Mode { Raw, Extended };
  TransportedRho(std::shared_ptr<const DefiningFunction> base, MapField G, Mode mode);
  double rho(const Vec4& x) const override;

private:
  std::shared_ptr<const DefiningFunction> base_;
  MapField G_;
  Mode mode_;
  double blend_lo_ = 0.3, blend_hi_ = 0.8;
};

std::shared_ptr<DefiningFunction> pushforward_defining(
    std::shared_ptr<const DefiningFunction> rho, const MapField& G, bool extended);

// Quasi-uniform boundary sample: deterministic sphere directions from the
// interior seed, projected onto {rho = 0} by one-dimensional root finding.
std::vector<Vec4> boundary_sample(const DefiningFunction& rho, int count,
                                  std::uint64_t seed = 12345);

struct LeviReport {
  std::vector<Vec4> points;
  std::vector<double> per_point_min;  // min tangential Levi eigenvalue
  double lambda_min = 0;
  double grad_floor = 0;  // min |grad rho| over the sample
  int sample_size = 0;
};

LeviReport levi_min(const DefiningFunction& rho, const std::vector<Vec4>& sample);
LeviReport levi_min(const DefiningFunction& rho, int count = 500);

// Levi form with respect to a structure A at a point p: evaluates
// dX dXbar rho on the frame L_i = X_i - (X_i rho / X_n rho) X_n with the
// connection term C = -omega([X_a, X_bbar]) from finite differences.
// Returns the (n-1)x(n-1) Hermitian matrix (1x1 for n = 2).
cplx levi_form_wrt_structure(const DefiningFunction& rho, const GridFunction& A,
                             const Vec4& p);

// Cap profile: smooth nondecreasing convex, 0 on (-inf,1], 1 at 4,
// 0 < chi' <= 1 on (1,4).
struct CapProfile {
  double operator()(double v) const;
  double d1(double v) const;
  double d2(double v) const;
};

struct CappedDomain {
  std::shared_ptr<DefiningFunction> rho_eps;
  std::shared_ptr<DefiningFunction> rho_0;
  double dist_c2 = 0;  // ||rho_eps - rho_0||_{B2,2} (sampled)
};

// rho_eps(z) = -y_n + |z'|^2 + eps^{-2} h(eps z', eps^2 x_n) + 5 chi(|z|^2)
// on B_2. Errors if the containment test rho_eps > 0 on dB_2 fails.
CappedDomain capped_dilated_domain(const std::function<double(cplx, double)>& h,
                                   double eps, const CapProfile& chi = {});

// Fitted-constant budget for the parameter formulas (Remark on stability /
// composition lemma). Measured once on the initial domain, then frozen.
struct StabilityBudget {
  double C2_star = 0;    // |f|_{B0,2} <= C2* |A|_s
  double Cs_star = 0;    // |f|_{B0,s+1} <= Cs* t^{-1/2} |A|_s
  double Css_star = 0;   // initial-condition constant, > sqrt(8n) C2*
  double Cr_star = 0;    // low/high estimate constant
  double eps_D0 = 0;     // admissible C2 perturbation radius
  double delta_rho0 = 0; // composition budget delta(rho0, eps, 2)
  double C_second = 2.0; // absolute constant C'' in delta*
  bool complete() const {
    return C2_star > 0 && Cs_star > 0 && Css_star > 0 && Cr_star > 0 &&
           eps_D0 > 0 && delta_rho0 > 0;
  }
};

// C2 distance between two defining functions, sampled on a coarse sub-grid
// of the box (sup of value, gradient and Hessian differences).
double c2_distance(const DefiningFunction& a, const DefiningFunction& b,
                   int pts_per_axis = 7);

// Builtin domains.
std::shared_ptr<DefiningFunction> unit_ball_domain(double box_halfwidth = 1.4);
// rho = |z|^2 - 1 + amp * bump, normalized so c2_distance to the ball is
// `c2_amount` times the ball's C2 norm.
std::shared_ptr<DefiningFunction> perturbed_ball_domain(double c2_amount,
                                                        double box_halfwidth = 1.4);

}  // namespace acs
