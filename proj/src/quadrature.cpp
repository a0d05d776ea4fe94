#include "divdiv/quadrature.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace divdiv {

void gauss_jacobi01(int q, int alpha, Vec& nodes, Vec& weights) {
  // Golub-Welsch for the Jacobi weight (1-s)^alpha on [-1,1], then s -> (1+s)/2.
  const double a = alpha, b = 0.0;
  Mat J = Mat::Zero(q, q);
  for (int j = 0; j < q; ++j) {
    const double s = 2.0 * j + a + b;
    J(j, j) = (j == 0) ? (b - a) / (a + b + 2.0) : (b * b - a * a) / (s * (s + 2.0));
    if (j > 0) {
      const double num = 4.0 * j * (j + a) * (j + b) * (j + a + b);
      const double den = s * s * (s + 1.0) * (s - 1.0);
      J(j, j - 1) = J(j - 1, j) = std::sqrt(num / den);
    }
  }
  Eigen::SelfAdjointEigenSolver<Mat> eig(J);
  const double mu0 = std::pow(2.0, a + b + 1.0) * std::tgamma(a + 1.0) * std::tgamma(b + 1.0) /
                     std::tgamma(a + b + 2.0);
  nodes.resize(q);
  weights.resize(q);
  const double jac = std::pow(0.5, a + 1.0);
  for (int i = 0; i < q; ++i) {
    nodes(i) = 0.5 * (1.0 + eig.eigenvalues()(i));
    const double v0 = eig.eigenvectors()(0, i);
    weights(i) = mu0 * v0 * v0 * jac;
  }
}

namespace {

QuadratureRule build_rule(int n, int degree) {
  QuadratureRule rule;
  rule.dim = n;
  rule.exactness_degree = degree;
  if (n == 0) {
    rule.points = Mat::Ones(1, 1);
    rule.weights = Vec::Ones(1);
    rule.exactness_degree = kMaxQuadratureDegree;
    return rule;
  }
  const int q = std::max(1, (degree + 2) / 2);
  std::vector<Vec> x(n), w(n);
  for (int a = 0; a < n; ++a) gauss_jacobi01(q, n - 1 - a, x[a], w[a]);
  int total = 1;
  for (int a = 0; a < n; ++a) total *= q;
  rule.points.resize(n + 1, total);
  rule.weights.resize(total);
  std::vector<int> idx(n, 0);
  for (int p = 0; p < total; ++p) {
    int rem = p;
    for (int a = n - 1; a >= 0; --a) {
      idx[a] = rem % q;
      rem /= q;
    }
    // xi_1 = t1, xi_2 = t2 (1-t1), xi_3 = t3 (1-t1)(1-t2)
    double remaining = 1.0, weight = 1.0;
    Vec xi(n);
    for (int a = 0; a < n; ++a) {
      const double t = x[a](idx[a]);
      xi(a) = t * remaining;
      remaining *= (1.0 - t);
      weight *= w[a](idx[a]);
    }
    rule.points(0, p) = 1.0 - xi.sum();
    rule.points.block(1, p, n, 1) = xi;
    rule.weights(p) = weight;
  }
  return rule;
}

}  // namespace

const QuadratureRule& simplex_quadrature(int n, int degree) {
  if (n < 0 || n > 3) throw Error(ErrorKind::UnsupportedDimension, "quadrature dimension " + std::to_string(n));
  if (degree < 0) throw Error(ErrorKind::UnsupportedDegree, "negative quadrature degree");
  if (degree > kMaxQuadratureDegree)
    throw Error(ErrorKind::UnsupportedDegree, "quadrature degree " + std::to_string(degree) + " exceeds " +
                                                  std::to_string(kMaxQuadratureDegree));
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<QuadratureRule>> cache;
  const int key_degree = n == 0 ? 0 : degree;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{n, key_degree}];
  if (!slot) slot = std::make_unique<QuadratureRule>(build_rule(n, key_degree));
  return *slot;
}

MappedQuadrature map_quadrature(const QuadratureRule& rule, const Carrier& carrier) {
  MappedQuadrature m;
  m.points = carrier.vertices * rule.points;
  double ref = 1.0;
  for (int i = 2; i <= rule.dim; ++i) ref *= i;
  m.weights = rule.weights * (carrier.measure * ref);
  return m;
}

MappedQuadrature carrier_quadrature(const Carrier& carrier, int degree) {
  return map_quadrature(simplex_quadrature(carrier.intrinsic_dim(), degree), carrier);
}

}  // namespace divdiv
