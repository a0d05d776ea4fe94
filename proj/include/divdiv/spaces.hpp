#pragma once

#include <Eigen/Sparse>

#include <iosfwd>
#include <string>
#include <vector>

#include "divdiv/elements.hpp"
#include "divdiv/mesh.hpp"
#include "divdiv/polynomial.hpp"

namespace divdiv {

using SparseMat = Eigen::SparseMatrix<double>;

/// Stress shape space plus the degrees of the multiplier blocks
/// (cell r, face u_b, face u_n, ridge u_e). A negative degree means the block
/// is absent.
struct SchemeSpec {
  ShapeKind shape = ShapeKind::Pk;
  int k = 0;
  int r = -2;
  int deg_b = -1;
  int deg_n = 0;
  int deg_e = 0;
  std::string name() const;
};

/// P_k stresses with r = k-2 and multiplier degrees (k-1, k, k).
SchemeSpec standard_scheme(int k);
/// Enriched P_k + x x^T H_{k-1} stresses with r = k-1.
SchemeSpec rt_scheme(int k);
/// Lowest-order enriched stresses with every multiplier block of degree 1.
SchemeSpec onepp_scheme();

/// Offsets of the multiplier blocks for either the full space (boundary
/// entities included) or the interior-only space. -1 marks dropped entities.
struct MultiplierNumbering {
  std::vector<int> cell_offset;
  std::vector<int> face_offset;  // u_b block followed by the u_n block
  std::vector<int> ridge_offset;
  int size = 0;
};

/// Mesh-wide bases and local operators of one hybridized discretization.
/// All local bases are L2-orthonormal on their carriers, so the weighted
/// inner product is diagonal.
class Discretization {
 public:
  Discretization(SimplicialMesh mesh, SchemeSpec spec);

  const SimplicialMesh& mesh() const { return mesh_; }
  const EntityFrames& frames() const { return frames_; }
  const SchemeSpec& spec() const { return spec_; }
  int dim() const { return mesh_.dim; }

  const CellGeometry& geometry(int c) const { return geom_[c]; }
  const TensorPolyBasis& stress_basis(int c) const { return stress_[c]; }
  const TensorPolyBasis& cell_basis(int c) const { return cell_mult_[c]; }
  const TensorPolyBasis& face_b_basis(int f) const { return face_b_[f]; }
  const TensorPolyBasis& face_n_basis(int f) const { return face_n_[f]; }
  const TensorPolyBasis& ridge_basis(int e) const { return ridge_[e]; }
  /// s_{T,F} for local face i of cell c.
  int face_sign(int c, int i) const { return frames_.cells[c].face_signs[i]; }

  int stress_local_size() const { return stress_size_; }
  int stress_size() const { return stress_size_ * mesh_.num_cells(); }
  int stress_offset(int c) const { return c * stress_size_; }

  int cell_block() const { return n_cell_; }
  int b_block() const { return n_b_; }
  int n_block() const { return n_n_; }
  int e_block() const { return n_e_; }
  int face_block() const { return n_b_ + n_n_; }

  const MultiplierNumbering& numbering(bool interior_only) const { return interior_only ? interior_ : full_; }
  int multiplier_size(bool interior_only) const { return numbering(interior_only).size; }

  /// Local column layout: [cell][face i: u_b, u_n]...[ridge p: u_e]...
  int local_size() const;
  int local_face_col(int i) const;     // start of the u_b block of local face i
  int local_ridge_col(int p) const;
  /// Global index per local column (-1 when the entity is dropped).
  std::vector<int> local_dofs(int c, bool interior_only) const;

  /// (sigma_i, weak Hessian of local multiplier column j)_T.
  const Mat& local_hessian(int c) const { return hess_[c]; }

  /// Diagonal of the weighted Gram matrix W.
  Vec weights(bool interior_only) const;

  /// Linear map from local multiplier columns to the d+1 face means of the
  /// nonconforming linear reconstruction v^CR.
  const Mat& cr_map(int c) const { return cr_[c]; }
  /// k = 0 only: local quadratic (cell chart monomials) from local columns.
  const Mat& mwx_map(int c) const { return mwx_[c]; }

 private:
  SimplicialMesh mesh_;
  EntityFrames frames_;
  SchemeSpec spec_;
  std::vector<CellGeometry> geom_;
  std::vector<TensorPolyBasis> stress_, cell_mult_, face_b_, face_n_, ridge_;
  std::vector<Mat> hess_, cr_, mwx_;
  MultiplierNumbering full_, interior_;
  int stress_size_ = 0, n_cell_ = 0, n_b_ = 0, n_n_ = 0, n_e_ = 0;
};

/// Value of v^CR at x for face means m on a cell.
double cr_value(const CellGeometry& geom, const Vec& face_means, const Vec& x);
/// Gradient of v^CR (constant on the cell).
Vec cr_gradient(const CellGeometry& geom, const Vec& face_means);

/// W as a sparse diagonal matrix.
SparseMat weighted_inner_product(const Discretization& disc, bool interior_only);

/// Weak div-div: rows are multiplier unknowns, columns broken stress
/// coefficients. Assembled from face and ridge jumps.
SparseMat assemble_weak_divdiv(const Discretization& disc, bool interior_only);

/// Weak Hessian: rows are stress coefficients, columns multiplier unknowns.
SparseMat assemble_weak_hessian(const Discretization& disc, bool interior_only);

/// Sum over cells of G_T^T G_T in the multiplier numbering.
SparseMat assemble_wg_stiffness(const Discretization& disc, bool interior_only);

/// Smooth scalar field with optional derivatives.
struct ScalarField {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<Mat(const Vec&)> hessian;
};

/// Blockwise L2 projections of a smooth field. Requires the gradient when the
/// u_n block exists.
Vec project_QM(const Discretization& disc, const ScalarField& field, bool interior_only, int extra_degree = 8);

/// Cellwise L2 projection onto the broken stress space.
Vec project_QSigma(const Discretization& disc, const std::function<Mat(const Vec&)>& tensor, int extra_degree = 8);

/// Per-cell face means of v^CR for a multiplier vector.
std::vector<Vec> cr_interpolate(const Discretization& disc, const Vec& v, bool interior_only);

/// Local multiplier coefficients of cell c extracted from a global vector.
Vec gather_local(const Discretization& disc, int c, const Vec& v, bool interior_only);

/// Conforming subspace of the broken NEW / RTPLUS / ONEPP element space,
/// described in global DoF coordinates.
struct ConformingSpace {
  ElementFamily family;
  int global_dofs = 0;           // before ridge constraints
  int constraints = 0;           // rows of the ridge constraint matrix
  int constraint_rank = 0;
  int dimension = 0;             // global_dofs - constraint_rank
  SparseMat constraint;          // constraints x global_dofs
  SparseMat to_local;            // (cells * local dofs) x global_dofs, with signs
  std::vector<Mat> inverse_dof;  // per cell: shape coefficients from local DoF values
  std::vector<TensorPolyBasis> shape;
  std::vector<CellGeometry> geom;
};

ConformingSpace build_conforming_space(const SimplicialMesh& mesh, const ElementFamily& family);

/// Shape coefficients (concatenated per cell) of a global DoF vector.
Vec conforming_coefficients(const ConformingSpace& space, const Vec& global);

/// Coordinate-format dump: "i j value" lines.
void write_coo(const SparseMat& a, std::ostream& out);

}  // namespace divdiv
