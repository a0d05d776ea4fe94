#include "divdiv/polynomial.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "divdiv/quadrature.hpp"

namespace divdiv {

namespace {

constexpr int kMaxBasisDegree = 8;

MonomialSet build_monomials(int n, int degree) {
  MonomialSet s;
  s.n = n;
  s.degree = degree;
  for (int t = 0; t <= degree; ++t) {
    if (n == 0) {
      if (t == 0) s.exps.push_back({0, 0, 0});
    } else if (n == 1) {
      s.exps.push_back({t, 0, 0});
    } else if (n == 2) {
      for (int a = t; a >= 0; --a) s.exps.push_back({a, t - a, 0});
    } else {
      for (int a = t; a >= 0; --a)
        for (int b = t - a; b >= 0; --b) s.exps.push_back({a, b, t - a - b});
    }
  }
  const int D = degree + 1;
  s.lookup.assign(D * D * D, -1);
  for (int i = 0; i < s.size(); ++i) {
    const auto& e = s.exps[i];
    s.lookup[e[0] + D * (e[1] + D * e[2])] = i;
  }
  return s;
}

Mat zero_coeffs(int n, int degree, int nfun) { return Mat::Zero(num_monomials(n, degree), nfun); }

TensorPolyBasis blank(SpaceId space, const Carrier& carrier, int k, ValueShape shape, int degree, int nfun) {
  TensorPolyBasis b;
  b.space = space;
  b.k = k;
  b.carrier = carrier;
  b.shape = shape;
  b.degree = degree;
  const int n = carrier.intrinsic_dim();
  b.coeffs.assign(component_count(shape, carrier.ambient_dim()), zero_coeffs(n, degree, nfun));
  return b;
}

void require_full_dim(const Carrier& carrier, const char* what) {
  if (carrier.intrinsic_dim() != carrier.ambient_dim())
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + " needs a full-dimensional carrier");
}

// Monomial index of xi^e within the set of the given degree.
int mono(int n, int degree, std::array<int, 3> e) { return monomials(n, degree).find(e); }

std::array<int, 3> unit_exp(int a) {
  std::array<int, 3> e = {0, 0, 0};
  e[a] = 1;
  return e;
}

std::array<int, 3> add_exp(std::array<int, 3> a, const std::array<int, 3>& b) {
  for (int i = 0; i < 3; ++i) a[i] += b[i];
  return a;
}

TensorPolyBasis vector_polys(SpaceId space, const Carrier& carrier, int k) {
  const int n = carrier.intrinsic_dim();
  const int d = carrier.ambient_dim();
  const int nm = num_monomials(n, k);
  TensorPolyBasis b = blank(space, carrier, k, ValueShape::Vector, k, n * nm);
  for (int dir = 0; dir < n; ++dir)
    for (int m = 0; m < nm; ++m)
      for (int a = 0; a < d; ++a) b.coeffs[a](m, dir * nm + m) = carrier.chart.axes(a, dir);
  return b;
}

// h * (K xi) for the skew generators K, tangential, mapped to physical comps.
TensorPolyBasis skew_part(const Carrier& carrier, int k) {
  const int n = carrier.intrinsic_dim();
  const int d = carrier.ambient_dim();
  const auto& hom = monomials(n, k);
  std::vector<std::array<int, 3>> homogeneous;
  for (const auto& e : hom.exps)
    if (e[0] + e[1] + e[2] == k) homogeneous.push_back(e);
  // Each generator: list of (local component, coordinate, sign).
  std::vector<std::vector<std::array<int, 3>>> gens;
  if (n == 2) gens = {{{0, 1, 1}, {1, 0, -1}}};
  if (n == 3)
    gens = {{{1, 2, -1}, {2, 1, 1}}, {{0, 2, 1}, {2, 0, -1}}, {{0, 1, -1}, {1, 0, 1}}};
  const int nfun = static_cast<int>(gens.size() * homogeneous.size());
  TensorPolyBasis b = blank(SpaceId::Derived, carrier, k, ValueShape::Vector, k + 1, nfun);
  int col = 0;
  for (const auto& g : gens)
    for (const auto& h : homogeneous) {
      for (const auto& [comp, coord, sign] : g) {
        const int row = mono(n, k + 1, add_exp(h, unit_exp(coord)));
        for (int a = 0; a < d; ++a) b.coeffs[a](row, col) += sign * carrier.chart.axes(a, comp);
      }
      ++col;
    }
  return b;
}

// Spanning set reduced to a basis of its span, using coefficient-space SVD.
TensorPolyBasis reduce_span(TensorPolyBasis b) {
  Mat stacked(b.ncomp() * b.coeffs[0].rows(), b.size());
  for (int c = 0; c < b.ncomp(); ++c) stacked.middleRows(c * b.coeffs[0].rows(), b.coeffs[0].rows()) = b.coeffs[c];
  Eigen::BDCSVD<Mat> svd(stacked, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > 1e-9 * s(0)) ++rank;
  Mat v = svd.matrixV().leftCols(rank);
  for (auto& c : b.coeffs) c = c * v;
  return b;
}

TensorPolyBasis sym_polys(SpaceId space, const Carrier& carrier, int k) {
  require_full_dim(carrier, "symmetric tensor space");
  const int d = carrier.ambient_dim();
  const int nm = num_monomials(d, k);
  const int npairs = d * (d + 1) / 2;
  TensorPolyBasis b = blank(space, carrier, k, ValueShape::SymTensor, k, npairs * nm);
  int pair = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j, ++pair)
      for (int m = 0; m < nm; ++m) {
        b.coeffs[i * d + j](m, pair * nm + m) = 1.0;
        b.coeffs[j * d + i](m, pair * nm + m) = 1.0;
      }
  return b;
}

TensorPolyBasis xx_times_homogeneous(const Carrier& carrier, int k) {
  require_full_dim(carrier, "x x^T H enrichment");
  if (k < 1) throw Error(ErrorKind::UnsupportedDegree, "x x^T H_{k-1} needs k >= 1");
  const int d = carrier.ambient_dim();
  std::vector<std::array<int, 3>> homogeneous;
  for (const auto& e : monomials(d, k - 1).exps)
    if (e[0] + e[1] + e[2] == k - 1) homogeneous.push_back(e);
  TensorPolyBasis b = blank(SpaceId::XXH, carrier, k, ValueShape::SymTensor, k + 1,
                            static_cast<int>(homogeneous.size()));
  for (size_t col = 0; col < homogeneous.size(); ++col)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const int row = mono(d, k + 1, add_exp(add_exp(homogeneous[col], unit_exp(i)), unit_exp(j)));
        b.coeffs[i * d + j](row, static_cast<Eigen::Index>(col)) = 1.0;
      }
  return b;
}

TensorPolyBasis sym_x_h1(const Carrier& carrier) {
  require_full_dim(carrier, "sym(x (x) H_1)");
  const int d = carrier.ambient_dim();
  TensorPolyBasis b = blank(SpaceId::SymXH1, carrier, 1, ValueShape::SymTensor, 2, d * d);
  int col = 0;
  for (int a = 0; a < d; ++a)
    for (int bb = 0; bb < d; ++bb, ++col)
      for (int i = 0; i < d; ++i) {
        // 0.5 (x_i x_a e_b^T + e_b x_a x_i^T): entries (i,b) and (b,i)
        const int row = mono(d, 2, add_exp(unit_exp(i), unit_exp(a)));
        b.coeffs[i * d + bb](row, col) += 0.5;
        b.coeffs[bb * d + i](row, col) += 0.5;
      }
  return b;
}

TensorPolyBasis hessian_image(const Carrier& carrier, int k) {
  require_full_dim(carrier, "hessian image");
  const int d = carrier.ambient_dim();
  const auto& set = monomials(d, k);
  const int first = num_monomials(d, 1);
  const int deg = std::max(k - 2, 0);
  TensorPolyBasis b = blank(SpaceId::HessP, carrier, k, ValueShape::SymTensor, deg, set.size() - first);
  for (int m = first; m < set.size(); ++m)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        auto e = set.exps[m];
        double factor = e[i];
        e[i] -= 1;
        if (e[i] < 0) continue;
        factor *= e[j];
        e[j] -= 1;
        if (e[j] < 0 || factor == 0.0) continue;
        b.coeffs[i * d + j](mono(d, deg, e), m - first) += factor;
      }
  return b;
}

TensorPolyBasis rt_bubble(const Carrier& carrier) {
  const int n = carrier.intrinsic_dim();
  const int d = carrier.ambient_dim();
  if (n < 1) throw Error(ErrorKind::ShapeMismatch, "edge bubbles need a carrier of dimension >= 1");
  const Mat lam = barycentric_polynomials(carrier);
  const int nedges = n * (n + 1) / 2;
  TensorPolyBasis b = blank(SpaceId::RTBubble, carrier, 2, ValueShape::Vector, 2, nedges);
  int col = 0;
  for (int i = 0; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j, ++col) {
      const Vec prod = poly_mul(n, lam.col(i), 1, lam.col(j), 1);
      const Vec t = (carrier.vertices.col(j) - carrier.vertices.col(i)).normalized();
      for (int a = 0; a < d; ++a) b.coeffs[a].col(col) = t(a) * prod;
    }
  return b;
}

// Linear map from the coefficients of `b` (symmetric tensors) to the
// coefficients of x^T tau x (scalar, degree + 2).
Mat xx_contraction(const TensorPolyBasis& b) {
  const int d = b.dim();
  const auto& src = monomials(d, b.degree);
  Mat out = Mat::Zero(num_monomials(d, b.degree + 2), b.size());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int m = 0; m < src.size(); ++m) {
        const int row = mono(d, b.degree + 2, add_exp(add_exp(src.exps[m], unit_exp(i)), unit_exp(j)));
        out.row(row) += b.coeffs[i * d + j].row(m);
      }
  return out;
}

// Linear map to the coefficients of tau x (vector, degree + 1), stacked by component.
Mat x_contraction(const TensorPolyBasis& b) {
  const int d = b.dim();
  const auto& src = monomials(d, b.degree);
  const int rows = num_monomials(d, b.degree + 1);
  Mat out = Mat::Zero(d * rows, b.size());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int m = 0; m < src.size(); ++m) {
        const int row = mono(d, b.degree + 1, add_exp(src.exps[m], unit_exp(j)));
        out.row(i * rows + row) += b.coeffs[i * d + j].row(m);
      }
  return out;
}

}  // namespace

int MonomialSet::find(const std::array<int, 3>& e) const {
  const int D = degree + 1;
  if (e[0] < 0 || e[1] < 0 || e[2] < 0 || e[0] >= D || e[1] >= D || e[2] >= D) return -1;
  return lookup[e[0] + D * (e[1] + D * e[2])];
}

const MonomialSet& monomials(int n, int degree) {
  if (n < 0 || n > 3 || degree < 0) throw Error(ErrorKind::OutOfRange, "monomial set");
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::unique_ptr<MonomialSet>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{n, degree}];
  if (!slot) slot = std::make_unique<MonomialSet>(build_monomials(n, degree));
  return *slot;
}

void monomial_jet(const MonomialSet& set, const Vec& xi, int order, MonomialJet& out) {
  const int n = set.n;
  const int D = set.degree;
  const int nm = set.size();
  if (D > 2 * kMaxBasisDegree) throw Error(ErrorKind::UnsupportedDegree, "monomial degree too high");
  double pw[3][2 * kMaxBasisDegree + 1];
  for (int a = 0; a < n; ++a) {
    pw[a][0] = 1.0;
    for (int p = 1; p <= D; ++p) pw[a][p] = pw[a][p - 1] * xi(a);
  }
  auto power = [&](int a, int p) { return p < 0 ? 0.0 : pw[a][p]; };
  out.val.resize(nm);
  for (int m = 0; m < nm; ++m) {
    double v = 1.0;
    for (int a = 0; a < n; ++a) v *= pw[a][set.exps[m][a]];
    out.val(m) = v;
  }
  if (order < 1) return;
  out.d1.assign(n, Vec(nm));
  for (int b = 0; b < n; ++b)
    for (int m = 0; m < nm; ++m) {
      const auto& e = set.exps[m];
      double v = e[b] * power(b, e[b] - 1);
      for (int a = 0; a < n; ++a)
        if (a != b) v *= pw[a][e[a]];
      out.d1[b](m) = v;
    }
  if (order < 2) return;
  out.d2.assign(n * n, Vec(nm));
  for (int b = 0; b < n; ++b)
    for (int c = 0; c < n; ++c)
      for (int m = 0; m < nm; ++m) {
        const auto& e = set.exps[m];
        double v;
        if (b == c) {
          v = e[b] * (e[b] - 1) * power(b, e[b] - 2);
        } else {
          v = e[b] * e[c] * power(b, e[b] - 1) * power(c, e[c] - 1);
        }
        for (int a = 0; a < n; ++a)
          if (a != b && a != c) v *= pw[a][e[a]];
        out.d2[b * n + c](m) = v;
      }
}

Vec poly_mul(int n, const Vec& a, int deg_a, const Vec& b, int deg_b) {
  const auto& sa = monomials(n, deg_a);
  const auto& sb = monomials(n, deg_b);
  const auto& sc = monomials(n, deg_a + deg_b);
  Vec c = Vec::Zero(sc.size());
  for (int i = 0; i < sa.size(); ++i) {
    if (a(i) == 0.0) continue;
    for (int j = 0; j < sb.size(); ++j) {
      if (b(j) == 0.0) continue;
      c(sc.find(add_exp(sa.exps[i], sb.exps[j]))) += a(i) * b(j);
    }
  }
  return c;
}

Mat poly_derivative_map(int n, int degree, int b) {
  const int target = std::max(degree - 1, 0);
  const auto& src = monomials(n, degree);
  Mat map = Mat::Zero(num_monomials(n, target), src.size());
  for (int m = 0; m < src.size(); ++m) {
    auto e = src.exps[m];
    if (e[b] == 0) continue;
    const double factor = e[b];
    e[b] -= 1;
    map(mono(n, target, e), m) = factor;
  }
  return map;
}

const char* to_string(SpaceId id) {
  switch (id) {
    case SpaceId::PScalar: return "P";
    case SpaceId::PVector: return "P-vector";
    case SpaceId::PSym: return "P-sym";
    case SpaceId::HScalar: return "H";
    case SpaceId::ND: return "ND";
    case SpaceId::RM: return "RM";
    case SpaceId::RTBubble: return "RT-bubble";
    case SpaceId::XXH: return "xxH";
    case SpaceId::SymXH1: return "sym(x H1)";
    case SpaceId::KerXXP1: return "ker(xx)P1";
    case SpaceId::HessP: return "hess(P)";
    case SpaceId::KerDotX: return "ker(x)";
    case SpaceId::SigmaPlus: return "Sigma+";
    case SpaceId::SigmaOnePP: return "Sigma1++";
    case SpaceId::Derived: return "derived";
  }
  return "?";
}

int component_count(ValueShape shape, int dim) {
  switch (shape) {
    case ValueShape::Scalar: return 1;
    case ValueShape::Vector: return dim;
    case ValueShape::SymTensor: return dim * dim;
  }
  return 0;
}

TensorPolyBasis make_basis(SpaceId space, const Carrier& carrier, int k) {
  if (k < 0 || k > kMaxBasisDegree)
    throw Error(ErrorKind::UnsupportedDegree, "basis degree " + std::to_string(k));
  const int n = carrier.intrinsic_dim();
  switch (space) {
    case SpaceId::PScalar: {
      TensorPolyBasis b = blank(space, carrier, k, ValueShape::Scalar, k, num_monomials(n, k));
      b.coeffs[0].setIdentity();
      return b;
    }
    case SpaceId::HScalar: {
      const int first = num_monomials(n, k - 1);
      TensorPolyBasis b = blank(space, carrier, k, ValueShape::Scalar, k, num_monomials(n, k) - first);
      for (int m = first; m < num_monomials(n, k); ++m) b.coeffs[0](m, m - first) = 1.0;
      return b;
    }
    case SpaceId::PVector: return vector_polys(space, carrier, k);
    case SpaceId::PSym: return sym_polys(space, carrier, k);
    case SpaceId::ND: {
      TensorPolyBasis b = concat({vector_polys(SpaceId::PVector, carrier, k), skew_part(carrier, k)});
      if (n == 3) b = reduce_span(b);
      b.space = space;
      b.k = k;
      return b;
    }
    case SpaceId::RM: {
      TensorPolyBasis b = make_basis(SpaceId::ND, carrier, 0);
      b.space = space;
      return b;
    }
    case SpaceId::RTBubble: return rt_bubble(carrier);
    case SpaceId::XXH: return xx_times_homogeneous(carrier, k);
    case SpaceId::SymXH1: return sym_x_h1(carrier);
    case SpaceId::KerXXP1: {
      TensorPolyBasis p1 = sym_polys(SpaceId::PSym, carrier, 1);
      TensorPolyBasis b = combine(p1, nullspace(xx_contraction(p1)));
      b.space = space;
      b.k = 1;
      return b;
    }
    case SpaceId::HessP: return hessian_image(carrier, k);
    case SpaceId::KerDotX: {
      TensorPolyBasis pk = sym_polys(SpaceId::PSym, carrier, k);
      TensorPolyBasis b = combine(pk, nullspace(x_contraction(pk)));
      b.space = space;
      b.k = k;
      return b;
    }
    case SpaceId::SigmaPlus: {
      TensorPolyBasis b = concat({sym_polys(SpaceId::PSym, carrier, k), xx_times_homogeneous(carrier, k)});
      b.space = space;
      b.k = k;
      return b;
    }
    case SpaceId::SigmaOnePP: {
      TensorPolyBasis b = concat(
          {sym_polys(SpaceId::PSym, carrier, 1), sym_x_h1(carrier), xx_times_homogeneous(carrier, 2)});
      b.space = space;
      b.k = 1;
      return b;
    }
    case SpaceId::Derived: break;
  }
  throw Error(ErrorKind::UnsupportedSpace, to_string(space));
}

TensorPolyBasis differentiate(const TensorPolyBasis& basis, DiffOp op) {
  require_full_dim(basis.carrier, "differentiate");
  const int d = basis.dim();
  const double s = basis.carrier.chart.scale;
  const int p = basis.degree;
  auto D = [&](int deg, int b) { return poly_derivative_map(d, deg, b); };
  const int p1 = std::max(p - 1, 0), p2 = std::max(p - 2, 0);
  TensorPolyBasis out;
  out.space = SpaceId::Derived;
  out.k = basis.k;
  out.carrier = basis.carrier;
  const int nfun = basis.size();
  switch (op) {
    case DiffOp::Grad: {
      if (basis.shape != ValueShape::Scalar) throw Error(ErrorKind::ShapeMismatch, "grad needs a scalar basis");
      out.shape = ValueShape::Vector;
      out.degree = p1;
      for (int a = 0; a < d; ++a) out.coeffs.push_back(D(p, a) * basis.coeffs[0] / s);
      return out;
    }
    case DiffOp::Hessian: {
      if (basis.shape != ValueShape::Scalar) throw Error(ErrorKind::ShapeMismatch, "hessian needs a scalar basis");
      out.shape = ValueShape::SymTensor;
      out.degree = p2;
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) out.coeffs.push_back(D(p1, a) * D(p, b) * basis.coeffs[0] / (s * s));
      return out;
    }
    case DiffOp::Div: {
      out.degree = p1;
      if (basis.shape == ValueShape::Vector) {
        out.shape = ValueShape::Scalar;
        Mat acc = Mat::Zero(num_monomials(d, p1), nfun);
        for (int j = 0; j < d; ++j) acc += D(p, j) * basis.coeffs[j] / s;
        out.coeffs.push_back(acc);
        return out;
      }
      if (basis.shape == ValueShape::SymTensor) {
        out.shape = ValueShape::Vector;
        for (int i = 0; i < d; ++i) {
          Mat acc = Mat::Zero(num_monomials(d, p1), nfun);
          for (int j = 0; j < d; ++j) acc += D(p, j) * basis.coeffs[i * d + j] / s;
          out.coeffs.push_back(acc);
        }
        return out;
      }
      throw Error(ErrorKind::ShapeMismatch, "div needs a vector or tensor basis");
    }
    case DiffOp::SymGrad: {
      if (basis.shape != ValueShape::Vector) throw Error(ErrorKind::ShapeMismatch, "symgrad needs a vector basis");
      out.shape = ValueShape::SymTensor;
      out.degree = p1;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          out.coeffs.push_back(0.5 * (D(p, j) * basis.coeffs[i] + D(p, i) * basis.coeffs[j]) / s);
      return out;
    }
    case DiffOp::DivDiv: {
      if (basis.shape != ValueShape::SymTensor) throw Error(ErrorKind::ShapeMismatch, "divdiv needs a tensor basis");
      out.shape = ValueShape::Scalar;
      out.degree = p2;
      Mat acc = Mat::Zero(num_monomials(d, p2), nfun);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) acc += D(p1, i) * D(p, j) * basis.coeffs[i * d + j] / (s * s);
      out.coeffs.push_back(acc);
      return out;
    }
  }
  throw Error(ErrorKind::ShapeMismatch, "unknown operator");
}

void basis_jet(const TensorPolyBasis& basis, const Vec& x, int order, BasisJet& out) {
  const Carrier& car = basis.carrier;
  const int n = car.intrinsic_dim();
  const int d = car.ambient_dim();
  const double s = car.chart.scale;
  const auto& set = monomials(n, basis.degree);
  MonomialJet mj;
  monomial_jet(set, car.chart.local(x), order, mj);
  const int nc = basis.ncomp();
  const int nf = basis.size();
  out.val.resize(nc, nf);
  for (int c = 0; c < nc; ++c) out.val.row(c).noalias() = mj.val.transpose() * basis.coeffs[c];
  if (order < 1) return;
  const Mat& A = car.chart.axes;
  const bool identity = (n == d);
  std::vector<Vec> g(d);
  for (int a = 0; a < d; ++a) {
    if (identity) {
      g[a] = mj.d1[a] / s;
    } else {
      g[a] = Vec::Zero(set.size());
      for (int b = 0; b < n; ++b) g[a] += A(a, b) / s * mj.d1[b];
    }
  }
  out.d1.resize(d);
  for (int a = 0; a < d; ++a) {
    out.d1[a].resize(nc, nf);
    for (int c = 0; c < nc; ++c) out.d1[a].row(c).noalias() = g[a].transpose() * basis.coeffs[c];
  }
  if (order < 2) return;
  out.d2.resize(d * d);
  for (int a = 0; a < d; ++a)
    for (int a2 = 0; a2 < d; ++a2) {
      Vec h;
      if (identity) {
        h = mj.d2[a * n + a2] / (s * s);
      } else {
        h = Vec::Zero(set.size());
        for (int b = 0; b < n; ++b)
          for (int b2 = 0; b2 < n; ++b2) h += A(a, b) * A(a2, b2) / (s * s) * mj.d2[b * n + b2];
      }
      Mat& m = out.d2[a * d + a2];
      m.resize(nc, nf);
      for (int c = 0; c < nc; ++c) m.row(c).noalias() = h.transpose() * basis.coeffs[c];
    }
}

std::vector<Mat> evaluate(const TensorPolyBasis& basis, const Mat& points) {
  std::vector<Mat> out;
  BasisJet jet;
  for (int q = 0; q < points.cols(); ++q) {
    basis_jet(basis, points.col(q), 0, jet);
    out.push_back(jet.val);
  }
  return out;
}

Mat barycentric_polynomials(const Carrier& carrier) {
  const int n = carrier.intrinsic_dim();
  Mat lam = Mat::Zero(num_monomials(n, 1), n + 1);
  const Vec base = barycentric(carrier, carrier.chart.global(Vec::Zero(n)));
  lam.row(0) = base.transpose();
  for (int b = 0; b < n; ++b) {
    Vec xi = Vec::Zero(n);
    xi(b) = 1.0;
    const Vec at = barycentric(carrier, carrier.chart.global(xi));
    lam.row(mono(n, 1, unit_exp(b))) = (at - base).transpose();
  }
  return lam;
}

Mat gram_matrix(const TensorPolyBasis& a, const TensorPolyBasis& b) {
  if (a.ncomp() != b.ncomp()) throw Error(ErrorKind::ShapeMismatch, "gram of different shapes");
  const MappedQuadrature q = carrier_quadrature(a.carrier, a.degree + b.degree);
  Mat g = Mat::Zero(a.size(), b.size());
  BasisJet ja, jb;
  for (int p = 0; p < q.size(); ++p) {
    basis_jet(a, q.points.col(p), 0, ja);
    basis_jet(b, q.points.col(p), 0, jb);
    g.noalias() += q.weights(p) * ja.val.transpose() * jb.val;
  }
  return g;
}

Mat gram_matrix(const TensorPolyBasis& basis) { return gram_matrix(basis, basis); }

TensorPolyBasis combine(const TensorPolyBasis& basis, const Mat& combination) {
  TensorPolyBasis out = basis;
  out.space = SpaceId::Derived;
  for (auto& c : out.coeffs) c = c * combination;
  return out;
}

TensorPolyBasis elevate(const TensorPolyBasis& basis, int degree) {
  if (degree <= basis.degree) return basis;
  TensorPolyBasis out = basis;
  out.degree = degree;
  const int rows = num_monomials(basis.intrinsic_dim(), degree);
  for (auto& c : out.coeffs) {
    Mat grown = Mat::Zero(rows, c.cols());
    grown.topRows(c.rows()) = c;
    c = grown;
  }
  return out;
}

TensorPolyBasis concat(const std::vector<TensorPolyBasis>& parts) {
  if (parts.empty()) throw Error(ErrorKind::ShapeMismatch, "empty concat");
  int degree = 0, total = 0;
  for (const auto& p : parts) {
    if (p.shape != parts[0].shape) throw Error(ErrorKind::ShapeMismatch, "concat of different shapes");
    degree = std::max(degree, p.degree);
    total += p.size();
  }
  TensorPolyBasis out = elevate(parts[0], degree);
  out.space = SpaceId::Derived;
  for (auto& c : out.coeffs) c.conservativeResize(Eigen::NoChange, total);
  int col = parts[0].size();
  for (size_t i = 1; i < parts.size(); ++i) {
    const TensorPolyBasis e = elevate(parts[i], degree);
    for (int c = 0; c < out.ncomp(); ++c) out.coeffs[c].middleCols(col, e.size()) = e.coeffs[c];
    col += e.size();
  }
  return out;
}

TensorPolyBasis orthonormalize(const TensorPolyBasis& basis) {
  const Mat g = gram_matrix(basis);
  Eigen::SelfAdjointEigenSolver<Mat> eig(g);
  const Vec& lam = eig.eigenvalues();
  const double top = lam(lam.size() - 1);
  std::vector<int> keep;
  for (int i = static_cast<int>(lam.size()) - 1; i >= 0; --i)
    if (lam(i) > 0 && std::sqrt(lam(i)) > 1e-9 * std::sqrt(top)) keep.push_back(i);
  Mat comb(basis.size(), static_cast<Eigen::Index>(keep.size()));
  for (size_t c = 0; c < keep.size(); ++c)
    comb.col(static_cast<Eigen::Index>(c)) = eig.eigenvectors().col(keep[c]) / std::sqrt(lam(keep[c]));
  TensorPolyBasis out = combine(basis, comb);
  // One Cholesky pass on the nearly orthonormal result recovers the accuracy
  // lost by working with the Gram matrix.
  const Eigen::LLT<Mat> llt(gram_matrix(out));
  if (llt.info() == Eigen::Success) {
    const Mat inv_lt = llt.matrixU().solve(Mat::Identity(out.size(), out.size()));
    out = combine(out, inv_lt);
  }
  out.space = basis.space;
  return out;
}

Mat nullspace(const Mat& a) {
  if (a.rows() == 0) return Mat::Identity(a.cols(), a.cols());
  Eigen::BDCSVD<Mat> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double top = s.size() ? s(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > 1e-9 * top) ++rank;
  return svd.matrixV().rightCols(a.cols() - rank);
}

int numerical_rank(const Mat& a) {
  if (a.size() == 0) return 0;
  Eigen::BDCSVD<Mat> svd(a);
  const auto& s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > 1e-9 * s(0)) ++rank;
  return rank;
}

}  // namespace divdiv
