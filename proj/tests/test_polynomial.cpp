#include <gtest/gtest.h>

#include <random>

#include "divdiv/polynomial.hpp"
#include "divdiv/quadrature.hpp"
#include "test_util.hpp"

using namespace divdiv;
using divdiv::testing::random_simplex;
using divdiv::testing::reference_simplex;

namespace {

double condition(const Mat& g) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(g);
  return eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff();
}

Carrier cell(int dim) { return make_carrier(reference_simplex(dim), ChartOrigin::Centroid); }

void expect_symmetric_values(const TensorPolyBasis& b, const Vec& x) {
  BasisJet j;
  basis_jet(b, x, 0, j);
  const int d = b.dim();
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) EXPECT_EQ((j.val.row(i * d + k) - j.val.row(k * d + i)).norm(), 0.0);
}

}  // namespace

TEST(Spaces, Dimensions) {
  EXPECT_EQ(make_basis(SpaceId::PSym, cell(3), 3).size(), 120);
  EXPECT_EQ(make_basis(SpaceId::SigmaOnePP, cell(3), 1).size(), 36);
  EXPECT_EQ(make_basis(SpaceId::SigmaOnePP, cell(2), 1).size(), 15);
  EXPECT_EQ(make_basis(SpaceId::KerXXP1, cell(3), 1).size(), 8);
  EXPECT_EQ(make_basis(SpaceId::KerXXP1, cell(2), 1).size(), 2);
  EXPECT_EQ(make_basis(SpaceId::RM, cell(3), 0).size(), 6);
  EXPECT_EQ(make_basis(SpaceId::RM, cell(2), 0).size(), 3);
  for (int m = 0; m <= 3; ++m) {
    EXPECT_EQ(make_basis(SpaceId::ND, cell(2), m).size(), (m + 1) * (m + 3));
    EXPECT_EQ(make_basis(SpaceId::ND, cell(3), m).size(), (m + 1) * (m + 3) * (m + 4) / 2);
  }
  // Sigma_{k+}: P_k(S) plus x x^T H_{k-1}.
  EXPECT_EQ(make_basis(SpaceId::SigmaPlus, cell(3), 2).size(), 60 + 3);
  Mat face = reference_simplex(3).leftCols(3);
  face.col(0) << 1, 0, 0;
  face.col(1) << 0, 1, 0;
  face.col(2) << 0, 0, 1;
  EXPECT_EQ(make_basis(SpaceId::RTBubble, make_carrier(face, ChartOrigin::FirstVertex), 2).size(), 3);
}

TEST(Spaces, GramWellConditioned) {
  for (int dim : {2, 3}) {
    for (SpaceId id : {SpaceId::PSym, SpaceId::SigmaPlus, SpaceId::ND, SpaceId::KerDotX, SpaceId::PVector}) {
      const TensorPolyBasis b = make_basis(id, cell(dim), 3);
      EXPECT_LT(condition(gram_matrix(b)), 1e12) << to_string(id);
    }
  }
}

TEST(Spaces, SymmetricValues) {
  std::mt19937 rng(3);
  const Carrier c = make_carrier(random_simplex(rng, 3), ChartOrigin::Centroid);
  for (SpaceId id : {SpaceId::PSym, SpaceId::SigmaPlus, SpaceId::SigmaOnePP, SpaceId::KerXXP1, SpaceId::HessP})
    expect_symmetric_values(make_basis(id, c, 3), c.centroid() + Vec::Constant(3, 0.1));
}

TEST(Spaces, UnsupportedDegree) { EXPECT_THROW(make_basis(SpaceId::PScalar, cell(2), 9), Error); }

TEST(Differentiate, DivDivOfConstantVanishes) {
  const TensorPolyBasis dd = differentiate(make_basis(SpaceId::PSym, cell(3), 0), DiffOp::DivDiv);
  for (const Mat& c : dd.coeffs) EXPECT_EQ(c.norm(), 0.0);
}

TEST(Differentiate, DivDivOfXXt) {
  const Carrier c = make_carrier(reference_simplex(3), ChartOrigin::Zero);
  const TensorPolyBasis xx = make_basis(SpaceId::XXH, c, 1);
  ASSERT_EQ(xx.size(), 1);
  BasisJet j;
  basis_jet(xx, (Vec(3) << 1, 0, 0).finished(), 0, j);
  Mat expect = Mat::Zero(3, 3);
  expect(0, 0) = 1;
  EXPECT_LT((j.val.col(0) - Eigen::Map<Vec>(expect.data(), 9)).norm(), 1e-15);
  const TensorPolyBasis dd = differentiate(xx, DiffOp::DivDiv);
  basis_jet(dd, (Vec(3) << 0.2, 0.3, 0.1).finished(), 0, j);
  EXPECT_NEAR(j.val(0, 0), 12.0, 1e-13);
}

TEST(Differentiate, HomogeneousEulerIdentity) {
  // x^T (hess q) x = r (r - 1) q on homogeneous polynomials of degree r.
  const Carrier c = make_carrier(reference_simplex(3), ChartOrigin::Zero);
  for (int r = 2; r <= 4; ++r) {
    const TensorPolyBasis h = make_basis(SpaceId::HScalar, c, r);
    const TensorPolyBasis hess = differentiate(h, DiffOp::Hessian);
    const Vec x = (Vec(3) << 0.3, -0.7, 0.4).finished();
    BasisJet jh, jq;
    basis_jet(hess, x, 0, jh);
    basis_jet(h, x, 0, jq);
    for (int f = 0; f < h.size(); ++f) {
      double q = 0.0;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) q += x(a) * x(b) * jh.val(a * 3 + b, f);
      EXPECT_NEAR(q, r * (r - 1) * jq.val(0, f), 1e-12);
    }
  }
}

TEST(Differentiate, HessianOfBarycentricProduct) {
  const Carrier c = make_carrier(reference_simplex(2), ChartOrigin::Centroid);
  const Mat lam = barycentric_polynomials(c);
  const Vec prod = poly_mul(2, lam.col(0), 1, lam.col(1), 1);
  TensorPolyBasis p = make_basis(SpaceId::PScalar, c, 2);
  p = combine(p, prod);
  const TensorPolyBasis h = differentiate(p, DiffOp::Hessian);
  const Vec g0 = (Vec(2) << -1, -1).finished(), g1 = (Vec(2) << 1, 0).finished();
  const Mat expect = g0 * g1.transpose() + g1 * g0.transpose();
  BasisJet j;
  for (const Vec& x : {Vec(c.centroid()), Vec(c.vertices.col(2))}) {
    basis_jet(h, x, 0, j);
    EXPECT_LT((j.val.col(0) - Eigen::Map<const Vec>(expect.data(), 4)).norm(), 1e-13);
  }
}

TEST(Differentiate, GradThenDivIsLaplacian) {
  std::mt19937 rng(5);
  for (int dim : {2, 3}) {
    const Carrier c = make_carrier(random_simplex(rng, dim), ChartOrigin::Centroid);
    const TensorPolyBasis p = make_basis(SpaceId::PScalar, c, 4);
    const TensorPolyBasis lap1 = differentiate(differentiate(p, DiffOp::Grad), DiffOp::Div);
    const TensorPolyBasis hess = differentiate(p, DiffOp::Hessian);
    BasisJet a, b;
    const Vec x = c.centroid();
    basis_jet(lap1, x, 0, a);
    basis_jet(hess, x, 0, b);
    Eigen::RowVectorXd trace = Eigen::RowVectorXd::Zero(p.size());
    for (int i = 0; i < dim; ++i) trace += b.val.row(i * dim + i);
    EXPECT_LT((a.val.row(0) - trace).norm(), 1e-9 * (1 + trace.norm()));
  }
}

TEST(Evaluate, BarycentricValues) {
  const Carrier c = make_carrier(reference_simplex(2), ChartOrigin::Centroid);
  TensorPolyBasis lam = combine(make_basis(SpaceId::PScalar, c, 1), barycentric_polynomials(c));
  const std::vector<Mat> v = evaluate(lam, c.vertices);
  EXPECT_NEAR(v[0](0, 0), 1.0, 1e-15);
  EXPECT_NEAR(v[0](0, 1), 0.0, 1e-15);
  const std::vector<Mat> mid = evaluate(lam, c.centroid());
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(mid[0](0, i), 1.0 / 3.0, 1e-15);
}

TEST(KernelSpaces, XxContractionVanishes) {
  std::mt19937 rng(9);
  for (int dim : {2, 3}) {
    const Carrier c = make_carrier(random_simplex(rng, dim), ChartOrigin::Centroid);
    const TensorPolyBasis k = make_basis(SpaceId::KerXXP1, c, 1);
    const MappedQuadrature q = carrier_quadrature(c, 6);
    BasisJet j;
    for (int f = 0; f < k.size(); ++f) {
      double norm = 0.0, worst = 0.0;
      for (int p = 0; p < q.size(); ++p) {
        basis_jet(k, q.points.col(p), 0, j);
        const Vec xi = c.chart.local(q.points.col(p)) * c.chart.scale;
        double v = 0.0;
        for (int a = 0; a < dim; ++a)
          for (int b = 0; b < dim; ++b) v += xi(a) * xi(b) * j.val(a * dim + b, f);
        worst = std::max(worst, std::abs(v));
        norm = std::max(norm, j.val.col(f).norm());
      }
      EXPECT_LT(worst, 1e-10 * norm);
    }
  }
}

TEST(KernelSpaces, HessianImagePlusKernelSpansP1) {
  for (int dim : {2, 3}) {
    const Carrier c = cell(dim);
    const TensorPolyBasis sum = concat({elevate(make_basis(SpaceId::HessP, c, 3), 1), make_basis(SpaceId::KerXXP1, c, 1)});
    const int target = make_basis(SpaceId::PSym, c, 1).size();
    EXPECT_EQ(sum.size(), target);
    Mat stacked(0, sum.size());
    for (const Mat& m : sum.coeffs) {
      stacked.conservativeResize(stacked.rows() + m.rows(), Eigen::NoChange);
      stacked.bottomRows(m.rows()) = m;
    }
    for (int j = 0; j < stacked.cols(); ++j) stacked.col(j).normalize();
    Eigen::JacobiSVD<Mat> svd(stacked);
    EXPECT_GT(svd.singularValues().minCoeff(), 1e-8);
  }
}

TEST(Orthonormalize, GivesIdentityGram) {
  std::mt19937 rng(1);
  const Carrier c = make_carrier(random_simplex(rng, 3), ChartOrigin::Centroid);
  const TensorPolyBasis o = orthonormalize(make_basis(SpaceId::SigmaPlus, c, 3));
  EXPECT_LT((gram_matrix(o) - Mat::Identity(o.size(), o.size())).norm(), 1e-10);
}
