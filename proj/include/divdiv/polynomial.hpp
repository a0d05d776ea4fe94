#pragma once

#include <array>
#include <vector>

#include "divdiv/common.hpp"
#include "divdiv/simplex.hpp"

namespace divdiv {

/// Monomials of total degree <= degree in n <= 3 variables, graded so that the
/// set of a lower degree is a prefix of the set of a higher degree.
struct MonomialSet {
  int n = 0;
  int degree = 0;
  std::vector<std::array<int, 3>> exps;
  std::vector<int> lookup;  // dense (degree+1)^3 table, -1 when absent

  int size() const { return static_cast<int>(exps.size()); }
  int find(const std::array<int, 3>& e) const;
};

/// Cached monomial set; references stay valid for the program run.
const MonomialSet& monomials(int n, int degree);

inline int num_monomials(int n, int degree) {
  return degree < 0 ? 0 : static_cast<int>(binomial(n + degree, n));
}

/// Values and derivatives (w.r.t. the local coordinates) of all monomials.
struct MonomialJet {
  Vec val;
  std::vector<Vec> d1;  // n entries
  std::vector<Vec> d2;  // n*n entries, index a*n+b
};

void monomial_jet(const MonomialSet& set, const Vec& xi, int order, MonomialJet& out);

/// Coefficient-vector arithmetic in the graded monomial basis.
Vec poly_mul(int n, const Vec& a, int deg_a, const Vec& b, int deg_b);
/// Derivative with respect to local coordinate b; result has degree deg-1.
Mat poly_derivative_map(int n, int degree, int b);

enum class ValueShape { Scalar, Vector, SymTensor };

enum class SpaceId {
  PScalar,       // P_k
  PVector,       // P_k tangential vector fields
  PSym,          // P_k symmetric tensors
  HScalar,       // homogeneous H_k
  ND,            // Nedelec P_k(R^n) + H_k(K) x
  RM,            // rigid motions a + K x
  RTBubble,      // span{lambda_i lambda_j t_ij} over edges of the carrier
  XXH,           // x x^T H_{k-1}
  SymXH1,        // sym(x (x) H_1(R^d))
  KerXXP1,       // {tau in P_1(S) : x^T tau x = 0}
  HessP,         // hessians of P_k
  KerDotX,       // {tau in P_k(S) : tau x = 0}
  SigmaPlus,     // P_k(S) + x x^T H_{k-1}
  SigmaOnePP,    // P_1(S) + sym(x (x) H_1) + x x^T H_1
  Derived,       // image of a differential operator or a linear combination
};

const char* to_string(SpaceId id);

/// A finite set of polynomial functions on a carrier, stored as coefficients
/// in the monomials of the carrier chart coordinates. Vector values are
/// physical (ambient) components; symmetric tensors store all d*d entries.
struct TensorPolyBasis {
  SpaceId space = SpaceId::Derived;
  int k = 0;
  Carrier carrier;
  ValueShape shape = ValueShape::Scalar;
  int degree = 0;          // maximal monomial degree
  std::vector<Mat> coeffs; // per component: num_monomials(n, degree) x size()

  int size() const { return coeffs.empty() ? 0 : static_cast<int>(coeffs[0].cols()); }
  int ncomp() const { return static_cast<int>(coeffs.size()); }
  int dim() const { return carrier.ambient_dim(); }
  int intrinsic_dim() const { return carrier.intrinsic_dim(); }
};

int component_count(ValueShape shape, int dim);

TensorPolyBasis make_basis(SpaceId space, const Carrier& carrier, int k);

enum class DiffOp { Grad, Hessian, Div, DivDiv, SymGrad };

/// Exact derivative of every basis function; requires a full-dimensional carrier.
TensorPolyBasis differentiate(const TensorPolyBasis& basis, DiffOp op);

/// Values and physical derivatives of all basis functions at one point.
struct BasisJet {
  Mat val;              // ncomp x size
  std::vector<Mat> d1;  // dim entries
  std::vector<Mat> d2;  // dim*dim entries, index a*dim+b
};

void basis_jet(const TensorPolyBasis& basis, const Vec& x, int order, BasisJet& out);

/// Values at each point column: one (ncomp x size) matrix per point.
std::vector<Mat> evaluate(const TensorPolyBasis& basis, const Mat& points);

/// Barycentric coordinates of the carrier as degree-1 polynomials.
Mat barycentric_polynomials(const Carrier& carrier);

/// L^2(carrier) Gram matrix.
Mat gram_matrix(const TensorPolyBasis& basis);
Mat gram_matrix(const TensorPolyBasis& a, const TensorPolyBasis& b);

/// New basis whose functions are basis * combination (columns).
TensorPolyBasis combine(const TensorPolyBasis& basis, const Mat& combination);

/// Union of spanning sets on a common carrier and shape.
TensorPolyBasis concat(const std::vector<TensorPolyBasis>& parts);

/// Raises the stored degree (zero padding).
TensorPolyBasis elevate(const TensorPolyBasis& basis, int degree);

/// L^2-orthonormal basis of the span; directions whose singular value is below
/// 1e-9 times the largest are dropped.
TensorPolyBasis orthonormalize(const TensorPolyBasis& basis);

/// Numeric nullspace (columns) with the 1e-9 relative singular value threshold.
Mat nullspace(const Mat& a);
int numerical_rank(const Mat& a);

}  // namespace divdiv
