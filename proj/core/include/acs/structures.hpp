#pragma once

#include <memory>
#include <optional>

#include "acs/domain.hpp"
#include "acs/grid.hpp"
#include "acs/homotopy.hpp"
#include "acs/maps.hpp"
#include "acs/mollifier.hpp"

namespace acs {

// Matrix field A_{abar}^b on the D-mask, frame X_abar = d_abar + A_abar^b d_b.
// Component layout: A.at(node, abar * n + b).
struct Structure {
  GridFunction A;  // rank Matrix, masked to D
  // norm ledger cache (filled by the driver)
  double norm_s = -1;
  double norm_r = -1;

  double sup() const { return A.sup_abs(); }
  static Structure zero(const GridSpec& sp, const std::vector<std::uint8_t>& mask);
};

struct IntegrabilityReport {
  GridFunction torsion;                 // rank Covector: T^g_{1bar 2bar}, g = 1..n
  double sup = 0;
  std::array<double, kNC> per_component{};
};

// T^g = X_1bar A^g_2bar - X_2bar A^g_1bar (the expansion of dbar A = [A, dA]).
IntegrabilityReport integrability_defect(const Structure& A);

// A = -(dbar phi)(I + d phi)^{-1}: the structure straightened by I + phi.
// phi supplies exact Wirtinger derivatives when available.
Structure oracle_structure(const MapField& phi, const GridSpec& sp,
                           const std::vector<std::uint8_t>& mask);

// Pointwise transform of the matrix under F = I + f (the frame identity),
// evaluated at in-mask nodes of A: A'(F(x)) = C^{-1} (A + dbar f + A d f).
// Throws on invertibility loss of the prefactor.
GridFunction structure_transform_at_nodes(const Structure& A, const MapField& F);

// Full pushforward: transform, then resample onto new_mask via MLS using the
// scattered image points F(x).
Structure pushforward_structure(const Structure& A, const MapField& F,
                                const MapField& G,
                                const std::vector<std::uint8_t>& new_mask);

// A' = (conj(L)^T)^{-1} A L^T under the C-linear map w = L z (exact).
Structure structure_clinear(const Structure& A, const cplx L[kNC][kNC]);

struct FiveTerms {
  GridFunction I1, I2, I3, I4, I5;  // rank Matrix on the D-mask
  GridFunction Atilde;              // (I+I5)^{-1} (I1+I2+I3+I4)
  GridFunction direct;              // (I+I5)^{-1} (A + dbar f + A d f)
  double agreement_sup = 0;         // sup |Atilde - direct|
};

// The five-term decomposition for f = -S_t E P A (f passed in, built by the
// same operator instances held by `H` and `mol`).
FiveTerms five_terms(const Structure& A, std::shared_ptr<const DefiningFunction> rho,
                     double t, const Mollifier& mol, const Homotopy& H,
                     const MapField& f);

struct JetNormalization {
  cplx A_at_p[kNC][kNC];   // removed constant part
  MapField linear_map;     // z -> z - A(p) zbar
  MapField quadratic_map;  // the Lemma-2.2 polynomial (about p)
  Structure result;
};

// Composes (a) the real-linear change making A(p) = 0 and (b) the quadratic
// polynomial map killing DA(p). Requires the defect symmetry at p.
JetNormalization normalize_jet(const Structure& A,
                               std::shared_ptr<const DefiningFunction> rho,
                               const Vec4& p, double defect_tol = 1e-2);

struct BoundaryNormalForm {
  std::function<C2(const C2&)> forward;   // composed polynomial map w = T(z)
  std::shared_ptr<DefiningFunction> rho_new;  // -y_n + |z'|^2 + h form
  std::function<double(cplx, double)> h;      // graph remainder h(z', x_n)
  double h_order_fit = 0;                     // fitted vanishing order of h
};

// Lemma-2.3(ii) normal form at a boundary point p: kills the pluriharmonic
// second-order terms by a holomorphic quadratic change and diagonalizes the
// tangential Hermitian part. A enters only through the o(|z-p|) precondition.
BoundaryNormalForm boundary_normal_form(std::shared_ptr<const DefiningFunction> rho,
                                        const Structure& A, const Vec4& p);

struct DilatedStructure {
  Structure A_eps;
  double eps = 0;
};

// A^(eps)[abar][b](z) = eps^{w(a)-w(b)} A[abar][b](eps z', eps^2 z_n) with
// axis weights w(z') = 1, w(z_n) = 2. Errors if the amplitude guard fails.
DilatedStructure anisotropic_dilate(const Structure& A, double eps,
                                    const GridSpec& out_spec,
                                    const std::vector<std::uint8_t>& out_mask);

}  // namespace acs
