#pragma once

#include "divdiv/common.hpp"
#include "divdiv/simplex.hpp"

namespace divdiv {

/// Quadrature on the reference n-simplex. Points are barycentric columns;
/// weights sum to the reference measure 1/n!.
struct QuadratureRule {
  int dim = 0;
  Mat points;  // (dim+1) x npoints
  Vec weights;
  int exactness_degree = 0;
};

constexpr int kMaxQuadratureDegree = 40;

/// Collapsed-coordinate Gauss-Jacobi product rule, exact to `degree`.
/// Rules are cached; the returned reference stays valid for the program run.
const QuadratureRule& simplex_quadrature(int intrinsic_dim, int degree);

/// Gauss-Jacobi nodes/weights on [0,1] for the weight (1-t)^alpha.
void gauss_jacobi01(int npoints, int alpha, Vec& nodes, Vec& weights);

/// A rule pushed forward onto a carrier: physical points and weights.
struct MappedQuadrature {
  Mat points;  // ambient_dim x npoints
  Vec weights;
  int size() const { return static_cast<int>(weights.size()); }
};

MappedQuadrature map_quadrature(const QuadratureRule& rule, const Carrier& carrier);
MappedQuadrature carrier_quadrature(const Carrier& carrier, int degree);

}  // namespace divdiv
