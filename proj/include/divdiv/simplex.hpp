#pragma once

#include "divdiv/common.hpp"

namespace divdiv {

/// Affine local coordinates xi = axes^T (x - origin) / scale on a simplex.
struct Chart {
  Vec origin;
  Mat axes;  // ambient_dim x intrinsic_dim, orthonormal columns
  double scale = 1.0;

  Vec local(const Vec& x) const { return axes.transpose() * (x - origin) / scale; }
  Vec global(const Vec& xi) const { return origin + scale * (axes * xi); }
};

/// A simplex embedded in R^d together with the chart its polynomials live in.
struct Carrier {
  Mat vertices;  // ambient_dim x (intrinsic_dim + 1)
  Chart chart;
  double measure = 0.0;   // counting measure 1 for points
  double diameter = 0.0;

  int ambient_dim() const { return static_cast<int>(vertices.rows()); }
  int intrinsic_dim() const { return static_cast<int>(vertices.cols()) - 1; }
  Vec centroid() const { return vertices.rowwise().mean(); }
};

enum class ChartOrigin { Centroid, FirstVertex, Zero };

double simplex_measure(const Mat& vertices);
double simplex_diameter(const Mat& vertices);

/// Gram-Schmidt on the edge vectors v_i - v_0, i = 1..n.
Mat edge_tangents(const Mat& vertices);

/// Builds a carrier. Full-dimensional carriers use the identity axes; lower
/// dimensional ones use edge_tangents. The chart scale is the diameter, except
/// for ChartOrigin::Zero which gives the raw coordinates (scale 1).
Carrier make_carrier(const Mat& vertices, ChartOrigin origin);

/// Barycentric coordinates of the orthogonal projection of x onto the carrier.
Vec barycentric(const Carrier& carrier, const Vec& x);

/// Unit normal of a codimension-one simplex (d vertices in R^d), pointing away
/// from the point `away_from`.
Vec facet_normal(const Mat& facet_vertices, const Vec& away_from);

/// Unit vector in the face spanned by `ridge_vertices` and `opposite`,
/// orthogonal to the ridge and pointing from `opposite` across it.
Vec ridge_conormal(const Mat& ridge_vertices, const Vec& opposite);

/// Normalized aspect ratio h/rho (1 for the regular simplex).
double aspect_ratio(const Mat& vertices);

}  // namespace divdiv
