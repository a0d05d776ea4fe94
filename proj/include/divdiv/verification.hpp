#pragma once

#include <iosfwd>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "divdiv/solvers.hpp"

namespace divdiv {

/// Outcome of one executable check. `pass` is true exactly when every
/// measured quantity lies within its declared tolerance.
struct CertificateReport {
  std::string check;
  std::string parameters;
  unsigned seed = 0;
  bool pass = false;
  std::vector<std::pair<std::string, double>> measured;
  std::vector<std::pair<std::string, double>> tolerances;
  std::string note;

  void add(const std::string& name, double value) { measured.emplace_back(name, value); }
  void tolerance(const std::string& name, double value) { tolerances.emplace_back(name, value); }
  double value(const std::string& name) const;  // throws OutOfRange when absent
};

/// One line per report: "PASS check [parameters] name=value ... (tol ...)".
std::string to_text(const CertificateReport& report);
/// Long format: check,parameters,seed,pass,kind,name,value.
void write_csv(const std::vector<CertificateReport>& reports, std::ostream& out);

/// Smooth symmetric tensor with entries a_ij sin(b_ij . x + c_ij).
struct TrigonometricTensor {
  int dim;
  Mat amp;
  std::vector<Vec> freq;  // index i*dim+j
  Mat phase;

  explicit TrigonometricTensor(int d);
  Mat value(const Vec& x) const;
  std::vector<Mat> gradient(const Vec& x) const;
  double divdiv(const Vec& x) const;
  TensorField field() const;
};

/// Random simplex with vertices uniform in [-1,1]^d and normalized aspect
/// ratio at most max_aspect. Draws that are nearly flat or too elongated are
/// counted in *rejected and redrawn.
Mat random_shape_regular_simplex(std::mt19937& rng, int dim, double max_aspect = 10.0, int* rejected = nullptr);

/// |(divdiv s, v) - (s, hess v) + boundary terms| relative to the largest term,
/// for s = stress * a and v = scalar * b on one cell.
double green_residual(const CellGeometry& geom, const TensorPolyBasis& stress, const Vec& a,
                      const TensorPolyBasis& scalar, const Vec& b);

struct FamilyCase {
  ElementFamily family;
  int dim = 2;
};

/// Smallest normalized singular value of the DoF matrix over random cells,
/// one report per case; pass when every value exceeds 1e-8.
std::vector<CertificateReport> check_unisolvence_sweep(const std::vector<FamilyCase>& cases, int trials,
                                                       unsigned seed);

/// Green identity for random (stress, P_{deg+2}) pairs on random cells.
CertificateReport check_green_identity(const FamilyCase& fc, int pairs, unsigned seed);

/// Green identity on every mesh cell and the commuting property of the
/// canonical interpolant for a trigonometric field.
CertificateReport check_green_and_fortin(const SimplicialMesh& mesh, const ElementFamily& family, unsigned seed);

/// Dense rank of the W^{1/2}-scaled weak div-div on the interior multipliers
/// (must equal their number) and on all multipliers (must lose exactly the
/// d+1 global linear functions).
CertificateReport check_surjectivity(const SimplicialMesh& mesh, const SchemeSpec& spec,
                                     const std::string& mesh_name);

/// Smallest eigenvalue of A x = mu B x for sparse SPD A, B by subspace
/// iteration with a Cholesky factorization of A (dense for small sizes).
double smallest_generalized_eigenvalue(const SparseMat& A, const SparseMat& B, unsigned seed = 1);

/// Smallest and largest eigenvalue of A x = mu B x by a dense solve (at most 4000 unknowns).
std::pair<double, double> generalized_eigenvalue_range(const SparseMat& A, const SparseMat& B);

/// Inf-sup constant of the weak div-div in the multiplier norm: with mu the
/// smallest eigenvalue of (K, W), alpha^2 = mu / (1 + mu).
double infsup_constant(const Discretization& disc);

CertificateReport estimate_infsup(int dim, const std::vector<int>& levels, const SchemeSpec& spec);

/// Gram matrix of the discrete H^2 seminorm built from the nonconforming
/// linear reconstruction (interior multipliers).
SparseMat discrete_h2_gram(const Discretization& disc);

/// rho = |weak Hessian| / discrete H^2 seminorm: sampled values must lie in
/// [band_low, band_high] and the extremal ratios may move less than 30%.
CertificateReport check_norm_equivalence(int dim, const std::vector<int>& levels, const SchemeSpec& spec,
                                         int samples, unsigned seed, double band_low = 1e-2, double band_high = 1e2);

CertificateReport check_poincare(int dim, const std::vector<int>& levels, const SchemeSpec& spec, int samples,
                                 unsigned seed);

/// Face/ridge DoF count after moving sub-simplex normal-plane moments onto
/// faces and ridges.
long long redistributed_dof_count(int d, int k);
/// Face/ridge DoF count with P_k moments of nn on faces and P_k moments on ridges.
long long merged_dof_count(int d, int k);
/// Closed-form dimension of the conforming NEW_k space on a 3D mesh.
long long conforming_dimension_formula(const SimplicialMesh& mesh, int k);

/// Conforming dimension, mesh-count identities, redistribution = merge for
/// d = 2..4 and k = 3..6, and the weak div-div nullity for P_{nullity_k}.
CertificateReport check_dimension_identities(const SimplicialMesh& mesh3d, int k, int nullity_k,
                                             const std::string& mesh_name);

/// The full desk-scale suite; dim = 0 runs both dimensions.
std::vector<CertificateReport> verify_all(int dim, unsigned seed);

}  // namespace divdiv
