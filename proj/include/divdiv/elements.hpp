#pragma once

#include <functional>
#include <string>
#include <vector>

#include "divdiv/mesh.hpp"
#include "divdiv/polynomial.hpp"
#include "divdiv/quadrature.hpp"

namespace divdiv {

// ---------------------------------------------------------------------------
// Shape spaces

/// Local stress shape spaces: P_k(T;S), P_k(T;S) + x x^T H_{k-1}(T), and the
/// lowest order P_1(T;S) + sym(x (x) H_1) + x x^T H_1.
enum class ShapeKind { Pk, PkPlus, OnePlusPlus };

TensorPolyBasis shape_basis(ShapeKind kind, int k, const Carrier& cell);

enum class FamilyTag { New, RtPlus, OnePlusPlus, NcK2 };

struct ElementFamily {
  FamilyTag tag = FamilyTag::New;
  int k = 3;
  int r = 1;  // degree of the div-div image
};

/// Validates (tag, k) and fills in r. Throws ErrorKind::Unsupported.
ElementFamily make_family(FamilyTag tag, int k);
std::string family_name(const ElementFamily& family);
ShapeKind shape_kind(const ElementFamily& family);
TensorPolyBasis shape_basis(const ElementFamily& family, const Carrier& cell);

// ---------------------------------------------------------------------------
// Traces of symmetric tensor fields sampled as a BasisJet (one column per
// function). All return one row entry per column.

Eigen::RowVectorXd normal_normal(const BasisJet& jet, const Vec& n);
/// n . div(tau) + div_F(tau n) with div_F(w) = sum_i t_i^T (grad w) t_i.
Eigen::RowVectorXd effective_shear(const BasisJet& jet, const Vec& n, const Mat& tangents);
Eigen::RowVectorXd conormal_normal(const BasisJet& jet, const Vec& conormal, const Vec& n);
/// tau n as a (dim x columns) matrix.
Mat tensor_normal(const BasisJet& jet, const Vec& n);
Eigen::RowVectorXd divdiv_value(const BasisJet& jet);
/// Full contraction sum_ij w_ij tau_ij.
Eigen::RowVectorXd contract(const BasisJet& jet, const Mat& w);

/// tr_e for the local ridge p = (i, j): sum over the two faces F_i, F_j.
Eigen::RowVectorXd ridge_trace(const BasisJet& jet, const CellGeometry& geom, int p);

struct TraceTables {
  std::vector<MappedQuadrature> face_quadrature;
  std::vector<MappedQuadrature> ridge_quadrature;
  std::vector<Mat> tr1;                  // per face: points x functions
  std::vector<Mat> tr2;                  // per face
  std::vector<Mat> tre;                  // per ridge
  std::vector<std::vector<Mat>> tangential_normal;  // per face, per point: dim x functions
};

TraceTables compute_traces(const TensorPolyBasis& basis, const CellGeometry& geom, int face_degree);

// ---------------------------------------------------------------------------
// Degrees of freedom

enum class DofKind {
  RidgeTrace,
  NormalNormal,
  EffectiveShear,
  TangentialNormal,
  InteriorDef,
  InteriorKernel,
  Bubble,
  DivDiv,
};

const char* to_string(DofKind kind);

struct DofBlock {
  DofKind kind;
  int entity = -1;  // local face or ridge index; -1 for cell blocks
  int aux = -1;     // bubble blocks: local index of the face F_r supplying the normal
  TensorPolyBasis tests;
  int size() const { return tests.size(); }
};

struct DoFSet {
  ElementFamily family;
  std::vector<DofBlock> blocks;
  int size() const;
  int count(DofKind kind) const;
};

DoFSet build_dof_set(const ElementFamily& family, const CellGeometry& geom);

/// Writes the jet of the sampled field(s) at x, up to derivative `order`.
using TensorSampler = std::function<void(const Vec& x, int order, BasisJet& out)>;

/// Applies all functionals to a sampled field. `sample_degree` is the
/// polynomial degree of the samples (use a large value for smooth fields).
Mat apply_dofs(const DoFSet& dofs, const CellGeometry& geom, const TensorSampler& sampler, int columns,
               int sample_degree);

Mat dof_matrix(const DoFSet& dofs, const CellGeometry& geom, const TensorPolyBasis& shape);

/// Smallest singular value after scaling rows, then columns, to unit norm.
double normalized_min_singular_value(const Mat& m);

/// Smooth symmetric tensor field with an optional analytic Jacobian.
struct TensorField {
  std::function<Mat(const Vec&)> value;
  std::function<std::vector<Mat>(const Vec&)> gradient;  // d_a tau, a = 0..dim-1
};

TensorSampler field_sampler(const TensorField& field);
TensorSampler basis_sampler(const TensorPolyBasis& basis);

/// Coefficients in `shape` of the interpolant matching every functional.
/// Functionals are integrated with the given degree (default 2k+12).
Vec canonical_interpolate(const ElementFamily& family, const CellGeometry& geom, const TensorPolyBasis& shape,
                          const TensorField& field, int quadrature_degree = 0);

}  // namespace divdiv
