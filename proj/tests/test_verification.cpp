#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "divdiv/verification.hpp"
#include "test_util.hpp"

using namespace divdiv;

TEST(DofCounts, RedistributionEqualsMergeByHand) {
  // d=2, k=3: vertices 3*3*1, edges 3*1*2; merged 3*1 + 3*4.
  EXPECT_EQ(redistributed_dof_count(2, 3), 15);
  EXPECT_EQ(merged_dof_count(2, 3), 15);
  // d=3, k=3: 4*6*1 + 6*3*2 + 4*1*1 = 64 = 6*4 + 4*10.
  EXPECT_EQ(redistributed_dof_count(3, 3), 64);
  EXPECT_EQ(merged_dof_count(3, 3), 64);
  for (int d = 2; d <= 4; ++d)
    for (int k = 3; k <= 6; ++k) EXPECT_EQ(redistributed_dof_count(d, k), merged_dof_count(d, k)) << d << " " << k;
}

TEST(DofCounts, ConformingFormulaOnSixTetCube) {
  // 6 cells, 18 faces, one interior edge (the long diagonal): 56*6 + 16*18 - 4.
  const SimplicialMesh cube = build_box_mesh(3, 1);
  ASSERT_EQ(cube.num_cells(), 6);
  ASSERT_EQ(cube.num_faces(), 18);
  ASSERT_EQ(cube.num_interior_ridges(), 1);
  EXPECT_EQ(conforming_dimension_formula(cube, 3), 620);
  EXPECT_THROW(conforming_dimension_formula(build_box_mesh(2, 1), 3), Error);
}

TEST(DofCounts, DimensionIdentitiesHoldOnSixTetCube) {
  const CertificateReport r = check_dimension_identities(build_box_mesh(3, 1), 3, 1, "cube_6");
  EXPECT_TRUE(r.pass) << to_text(r);
  EXPECT_EQ(r.value("constructed_dim"), 620);
  EXPECT_EQ(r.value("divdiv_nullity"), r.value("stress_dim_minus_multipliers"));
}

TEST(TrigonometricField, DivDivMatchesCentralDifferences) {
  std::mt19937 rng(3);
  for (int d : {2, 3}) {
    const TrigonometricTensor t(d);
    const Vec x = divdiv::testing::random_vector(rng, d);
    const double eps = 1e-5;
    double dd = 0.0;
    for (int a = 0; a < d; ++a) {
      Vec xp = x, xm = x;
      xp(a) += eps;
      xm(a) -= eps;
      const std::vector<Mat> gp = t.gradient(xp), gm = t.gradient(xm);
      // divdiv = sum_ij d_i d_j t_ij, differencing the closed-form gradient in direction a = i.
      for (int j = 0; j < d; ++j) dd += (gp[j](a, j) - gm[j](a, j)) / (2 * eps);
    }
    EXPECT_NEAR(t.divdiv(x), dd, 1e-6 * (1 + std::abs(dd)));
    EXPECT_LT((t.value(x) - t.value(x).transpose()).norm(), 1e-15);
  }
}

TEST(RandomSimplex, RespectsAspectBound) {
  std::mt19937 rng(9);
  int rejected = 0;
  for (int i = 0; i < 50; ++i) {
    const Mat v = random_shape_regular_simplex(rng, 3, 4.0, &rejected);
    EXPECT_LE(aspect_ratio(v), 4.0);
  }
  EXPECT_GT(rejected, 0);
}

TEST(Certificates, UnisolvenceAndGreenOnSmallSweeps) {
  const std::vector<FamilyCase> cases = {{make_family(FamilyTag::New, 3), 2},
                                         {make_family(FamilyTag::OnePlusPlus, 1), 3}};
  for (const CertificateReport& r : check_unisolvence_sweep(cases, 5, 1)) {
    EXPECT_TRUE(r.pass) << to_text(r);
    EXPECT_EQ(r.value("flat_cell_refused"), 1);
  }
  EXPECT_TRUE(check_green_identity({make_family(FamilyTag::RtPlus, 2), 2}, 5, 1).pass);
  EXPECT_TRUE(check_green_identity({make_family(FamilyTag::NcK2, 2), 3}, 5, 1).pass);
}

TEST(Certificates, FortinCommutesOnCoarseMesh) {
  const CertificateReport r = check_green_and_fortin(build_box_mesh(2, 2), make_family(FamilyTag::New, 3), 4);
  EXPECT_TRUE(r.pass) << to_text(r);
  EXPECT_LT(r.value("fortin_residual"), 1e-8);
  const CertificateReport nc = check_green_and_fortin(build_box_mesh(2, 1), make_family(FamilyTag::NcK2, 2), 4);
  EXPECT_THROW(nc.value("fortin_residual"), Error);
  EXPECT_FALSE(nc.note.empty());
}

TEST(Certificates, SurjectivityOnTwoTriangles) {
  // No interior vertex: the interior multipliers are the cell blocks and the diagonal face.
  for (int k = 0; k <= 3; ++k) {
    const CertificateReport r = check_surjectivity(build_box_mesh(2, 1), standard_scheme(k), "two_triangles");
    EXPECT_TRUE(r.pass) << to_text(r);
    EXPECT_EQ(r.value("rank_interior"), r.value("dim_interior"));
    EXPECT_EQ(r.value("dim_full") - r.value("rank_full"), 3);
  }
  const CertificateReport opp = check_surjectivity(build_box_mesh(2, 1), onepp_scheme(), "two_triangles");
  EXPECT_TRUE(opp.pass) << to_text(opp);
  EXPECT_THROW(check_surjectivity(build_box_mesh(2, 24), standard_scheme(3), "big"), Error);
}

namespace {

// Dirichlet second-difference matrix: eigenvalues 2 - 2 cos(j pi / (n+1)).
SparseMat second_difference(int n) {
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, 2.0);
    if (i + 1 < n) {
      t.emplace_back(i, i + 1, -1.0);
      t.emplace_back(i + 1, i, -1.0);
    }
  }
  SparseMat A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

SparseMat scaled_identity(int n, double s) {
  SparseMat B(n, n);
  B.setIdentity();
  return s * B;
}

}  // namespace

TEST(Eigen, SmallestGeneralizedEigenvalueDenseAndIterative) {
  for (int n : {50, 700}) {
    const double exact = (2 - 2 * std::cos(M_PI / (n + 1))) / 3.0;
    EXPECT_NEAR(smallest_generalized_eigenvalue(second_difference(n), scaled_identity(n, 3.0)), exact,
                1e-8 * exact) << n;
  }
}

TEST(Eigen, RangeAndCap) {
  const int n = 40;
  const auto [lo, hi] = generalized_eigenvalue_range(second_difference(n), scaled_identity(n, 2.0));
  EXPECT_NEAR(lo, (2 - 2 * std::cos(M_PI / (n + 1))) / 2, 1e-12);
  EXPECT_NEAR(hi, (2 - 2 * std::cos(n * M_PI / (n + 1))) / 2, 1e-12);
  EXPECT_THROW(generalized_eigenvalue_range(scaled_identity(4001, 1.0), scaled_identity(4001, 1.0)), Error);
}

TEST(Stability, InfSupStaysAwayFromZero) {
  const CertificateReport r = estimate_infsup(2, {2, 4}, standard_scheme(1));
  EXPECT_TRUE(r.pass) << to_text(r);
  EXPECT_GT(r.value("alpha_n4"), 0.5);
  EXPECT_LE(r.value("alpha_n4"), 1.0);
}

TEST(Stability, PoincareConstantBoundsSamples) {
  const CertificateReport r = check_poincare(2, {8, 16}, standard_scheme(1), 10, 2);
  EXPECT_TRUE(r.pass) << to_text(r);
  EXPECT_EQ(r.value("samples_below_constant"), 1);
  EXPECT_THROW(check_poincare(2, {4}, standard_scheme(1), 10, 2), Error);
}

TEST(Stability, NormEquivalenceHonoursBand) {
  const CertificateReport r = check_norm_equivalence(2, {4, 8}, standard_scheme(1), 10, 2);
  EXPECT_TRUE(r.pass) << to_text(r);
  EXPECT_LE(r.value("sample_rho_max"), r.value("rho_max_n8") * (1 + 1e-9));
  EXPECT_GE(r.value("sample_rho_min"), r.value("rho_min_n8") * (1 - 1e-9));
  EXPECT_FALSE(check_norm_equivalence(2, {4, 8}, standard_scheme(1), 10, 2, 1e-2, 1e-3).pass);
}

TEST(Reports, TextAndCsvLayout) {
  CertificateReport r;
  r.check = "demo";
  r.parameters = "a=1 b=2";
  r.seed = 7;
  r.pass = true;
  r.add("x", 0.5);
  r.tolerance("x", 1.0);
  r.note = "hello";
  EXPECT_EQ(to_text(r), "PASS demo [a=1 b=2] seed=7 x=0.5 (tol x=1) -- hello");
  std::ostringstream csv;
  write_csv({r}, csv);
  EXPECT_EQ(csv.str(),
            "check,parameters,seed,pass,kind,name,value\n"
            "demo,\"a=1 b=2\",7,1,measured,x,0.5\n"
            "demo,\"a=1 b=2\",7,1,tolerance,x,1\n");
  EXPECT_THROW(r.value("y"), Error);
}

TEST(Reports, VerifyAllRejectsOtherDimensions) { EXPECT_THROW(verify_all(4, 1), Error); }
