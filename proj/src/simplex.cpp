#include "divdiv/simplex.hpp"

#include <cmath>
#include <limits>

namespace divdiv {

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

double simplex_measure(const Mat& vertices) {
  const int n = static_cast<int>(vertices.cols()) - 1;
  if (n == 0) return 1.0;
  Mat edges(vertices.rows(), n);
  for (int i = 0; i < n; ++i) edges.col(i) = vertices.col(i + 1) - vertices.col(0);
  const double gram_det = (edges.transpose() * edges).determinant();
  return std::sqrt(std::max(gram_det, 0.0)) / factorial(n);
}

double simplex_diameter(const Mat& vertices) {
  double h = 0.0;
  for (int i = 0; i < vertices.cols(); ++i)
    for (int j = i + 1; j < vertices.cols(); ++j)
      h = std::max(h, (vertices.col(i) - vertices.col(j)).norm());
  return h;
}

Mat edge_tangents(const Mat& vertices) {
  const int n = static_cast<int>(vertices.cols()) - 1;
  Mat t(vertices.rows(), n);
  for (int i = 0; i < n; ++i) {
    Vec v = vertices.col(i + 1) - vertices.col(0);
    for (int j = 0; j < i; ++j) v -= t.col(j).dot(v) * t.col(j);
    const double len = v.norm();
    if (len == 0.0) throw Error(ErrorKind::DegenerateCell, "collinear simplex vertices");
    t.col(i) = v / len;
  }
  return t;
}

Carrier make_carrier(const Mat& vertices, ChartOrigin origin) {
  Carrier c;
  c.vertices = vertices;
  const int d = c.ambient_dim();
  const int n = c.intrinsic_dim();
  c.measure = simplex_measure(vertices);
  c.diameter = n == 0 ? 0.0 : simplex_diameter(vertices);
  if (n > 0 && c.measure <= 1e-14 * std::pow(c.diameter, n))
    throw Error(ErrorKind::DegenerateCell, "simplex has zero measure");
  c.chart.axes = (n == d) ? Mat(Mat::Identity(d, d)) : (n == 0 ? Mat(d, 0) : edge_tangents(vertices));
  switch (origin) {
    case ChartOrigin::Centroid: c.chart.origin = c.centroid(); break;
    case ChartOrigin::FirstVertex: c.chart.origin = vertices.col(0); break;
    case ChartOrigin::Zero: c.chart.origin = Vec::Zero(d); break;
  }
  c.chart.scale = (origin == ChartOrigin::Zero || n == 0) ? 1.0 : c.diameter;
  return c;
}

Vec barycentric(const Carrier& carrier, const Vec& x) {
  const int n = carrier.intrinsic_dim();
  Vec lam(n + 1);
  if (n == 0) {
    lam(0) = 1.0;
    return lam;
  }
  Mat edges(carrier.ambient_dim(), n);
  for (int i = 0; i < n; ++i) edges.col(i) = carrier.vertices.col(i + 1) - carrier.vertices.col(0);
  const Vec rhs = x - carrier.vertices.col(0);
  const Vec tail = (edges.transpose() * edges).ldlt().solve(edges.transpose() * rhs);
  lam(0) = 1.0 - tail.sum();
  lam.tail(n) = tail;
  return lam;
}

Vec facet_normal(const Mat& facet_vertices, const Vec& away_from) {
  const int d = static_cast<int>(facet_vertices.rows());
  Mat edges(d, d - 1);
  for (int i = 0; i < d - 1; ++i) edges.col(i) = facet_vertices.col(i + 1) - facet_vertices.col(0);
  // The normal spans the orthogonal complement of the edge vectors.
  Eigen::FullPivLU<Mat> lu(edges.transpose());
  Vec n = lu.kernel().col(0);
  n.normalize();
  if (n.dot(facet_vertices.col(0) - away_from) < 0) n = -n;
  return n;
}

Vec ridge_conormal(const Mat& ridge_vertices, const Vec& opposite) {
  Vec w = ridge_vertices.col(0) - opposite;
  if (ridge_vertices.cols() > 1) {
    const Mat t = edge_tangents(ridge_vertices);
    w -= t * (t.transpose() * w);
  }
  return w.normalized();
}

double aspect_ratio(const Mat& vertices) {
  const int d = static_cast<int>(vertices.rows());
  const int n = static_cast<int>(vertices.cols()) - 1;
  const double vol = simplex_measure(vertices);
  const double h = simplex_diameter(vertices);
  if (vol <= 1e-14 * std::pow(h, n)) return std::numeric_limits<double>::infinity();
  double surface = 0.0;
  for (int i = 0; i <= n; ++i) {
    Mat facet(d, n);
    int c = 0;
    for (int j = 0; j <= n; ++j)
      if (j != i) facet.col(c++) = vertices.col(j);
    surface += simplex_measure(facet);
  }
  const double rho = n * vol / surface;
  const double regular = (n == 1) ? 2.0 : (n == 2 ? 2.0 * std::sqrt(3.0) : 2.0 * std::sqrt(6.0));
  return (h / rho) / regular;
}

}  // namespace divdiv
