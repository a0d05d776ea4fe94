#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "divdiv/solvers.hpp"
#include "test_util.hpp"

using namespace divdiv;
using divdiv::testing::random_vector;

namespace {

// Random polynomial of the given degree in raw coordinates, with derivatives.
ScalarField random_polynomial(int dim, int degree, unsigned seed) {
  std::mt19937 rng(seed);
  const Carrier car = make_carrier(divdiv::testing::reference_simplex(dim), ChartOrigin::Zero);
  const TensorPolyBasis p = make_basis(SpaceId::PScalar, car, degree);
  const TensorPolyBasis q = combine(p, random_vector(rng, p.size()));
  ScalarField f;
  f.value = [q](const Vec& x) {
    BasisJet j;
    basis_jet(q, x, 0, j);
    return j.val(0, 0);
  };
  f.gradient = [q, dim](const Vec& x) {
    BasisJet j;
    basis_jet(q, x, 1, j);
    Vec g(dim);
    for (int a = 0; a < dim; ++a) g(a) = j.d1[a](0, 0);
    return g;
  };
  f.hessian = [q, dim](const Vec& x) {
    BasisJet j;
    basis_jet(q, x, 2, j);
    Mat h(dim, dim);
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b) h(a, b) = j.d2[a * dim + b](0, 0);
    return h;
  };
  return f;
}

ManufacturedCase polynomial_case(int dim, int degree, unsigned seed) {
  ManufacturedCase mc;
  mc.dim = dim;
  mc.name = "poly";
  mc.u = random_polynomial(dim, degree, seed);
  mc.f = [](const Vec&) { return 0.0; };
  return mc;
}

}  // namespace

TEST(Manufactured, ClosedFormsAgreeWithDifferences) {
  EXPECT_LT(manufactured_self_check(sine_case(2), 25, 3), 1e-6);
  EXPECT_LT(manufactured_self_check(sine_case(3), 25, 4), 1e-6);
}

TEST(Manufactured, CenterValues) {
  const ManufacturedCase mc = sine_case(2);
  const Vec c = Vec::Constant(2, 0.5);
  EXPECT_NEAR(mc.u.value(c), 1.0, 1e-14);
  // At the center: u_xxxx = u_yyyy = 8 pi^4 and u_xxyy = 4 pi^4.
  EXPECT_NEAR(mc.f(c), 24 * std::pow(M_PI, 4), 1e-9);
  EXPECT_NEAR(mc.sigma(c)(0, 0), 2 * M_PI * M_PI, 1e-12);
  EXPECT_THROW(make_case("nope", 2), Error);
  EXPECT_THROW(sine_case(4), Error);
}

TEST(Hybridized, ZeroLoadGivesZeroSolution) {
  const Discretization disc(build_box_mesh(2, 2), standard_scheme(1));
  const DiscreteSolution sol = solve_hybridized(disc, zero_case(2).f);
  EXPECT_EQ(sol.u.norm(), 0.0);
  EXPECT_EQ(sol.sigma.norm(), 0.0);
}

TEST(Hybridized, StressSatisfiesTheWeakEquilibrium) {
  // W B sigma_h = -b follows from eliminating the multiplier.
  for (const SchemeSpec& spec : {standard_scheme(0), standard_scheme(2), rt_scheme(2), onepp_scheme()}) {
    const Discretization disc(build_box_mesh(2, 3), spec);
    const ManufacturedCase mc = sine_case(2);
    const DiscreteSolution sol = solve_hybridized(disc, mc.f);
    const Vec b = assemble_load(disc, mc.f, 2 * spec.k + 6);
    const Vec lhs = weighted_inner_product(disc, true) * (assemble_weak_divdiv(disc, true) * sol.sigma);
    EXPECT_LT((lhs + b).norm(), 1e-9 * b.norm()) << spec.name();
    const SparseMat K = assemble_wg_stiffness(disc, true);
    EXPECT_LT((K * sol.u - b).norm(), 1e-9 * b.norm()) << spec.name();
  }
}

TEST(Hybridized, ConjugateGradientMatchesCholesky) {
  const Discretization disc(build_box_mesh(2, 3), standard_scheme(1));
  const ManufacturedCase mc = sine_case(2);
  SolveOptions cg;
  cg.solver = LinearSolver::ConjugateGradient;
  const DiscreteSolution a = solve_hybridized(disc, mc.f);
  const DiscreteSolution b = solve_hybridized(disc, mc.f, cg);
  EXPECT_EQ(a.solver_used, "cholesky");
  EXPECT_EQ(b.solver_used, "cg");
  EXPECT_GT(b.iterations, 0);
  EXPECT_LT((a.u - b.u).norm(), 1e-8 * a.u.norm());
}

TEST(Hybridized, CgIterationCapReportsFailure) {
  const Discretization disc(build_box_mesh(2, 3), standard_scheme(1));
  SolveOptions cg;
  cg.solver = LinearSolver::ConjugateGradient;
  cg.cg_max_iterations = 2;
  EXPECT_THROW(solve_hybridized(disc, sine_case(2).f, cg), Error);
}

TEST(Postprocess, ReproducesPolynomialsOfDegreeKPlus2) {
  for (const SchemeSpec& spec : {standard_scheme(3), rt_scheme(2), onepp_scheme()}) {
    const int k = spec.k;
    const Discretization disc(build_box_mesh(2, 2), spec);
    const ManufacturedCase mc = polynomial_case(2, k + 2, 11 + k);
    DiscreteSolution sol;
    sol.spec = spec;
    sol.u = project_QM(disc, mc.u, true);
    sol.sigma = project_QSigma(disc, [&](const Vec& x) { return mc.sigma(x); });
    postprocess(disc, sol);
    const ErrorRow row = compute_errors(disc, sol, mc, 2 * k + 6);
    EXPECT_LT(row.err_sigma, 1e-10) << spec.name();
    EXPECT_LT(row.err_hess, 1e-10) << spec.name();
    EXPECT_LT(row.err_u0h, 1e-10) << spec.name();
    EXPECT_LT(row.err_pp_h2, 1e-9) << spec.name();
    EXPECT_LT(row.err_pp_l2, 1e-10) << spec.name();
  }
}

TEST(Errors, QuadratureShortfallIsRejected) {
  const Discretization disc(build_box_mesh(2, 1), standard_scheme(2));
  const DiscreteSolution sol = solve_hybridized(disc, sine_case(2).f);
  try {
    compute_errors(disc, sol, sine_case(2), 9);
    FAIL() << "expected a shortfall";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::QuadratureShortfall);
  }
}

TEST(Errors, RateFitOfPowerLaw) {
  const std::vector<double> h = {0.5, 0.25, 0.125, 0.0625};
  std::vector<double> e;
  for (double x : h) e.push_back(3.0 * std::pow(x, 2.5));
  EXPECT_NEAR(fit_rate(h, e), 2.5, 1e-12);
  EXPECT_THROW(fit_rate({1.0}, {1.0}), Error);
  EXPECT_NEAR(max_cell_diameter(build_box_mesh(2, 4)), std::sqrt(2.0) / 4, 1e-14);
}

TEST(Convergence, LowestOrderSmoke) {
  const ManufacturedCase mc = sine_case(2);
  std::vector<double> h, es;
  for (int n : {4, 8, 16}) {
    const Discretization disc(build_box_mesh(2, n), standard_scheme(1));
    DiscreteSolution sol = solve_hybridized(disc, mc.f);
    const ErrorRow row = compute_errors(disc, sol, mc, 8);
    h.push_back(row.h);
    es.push_back(row.err_sigma);
  }
  EXPECT_GT(fit_rate(h, es), 1.7);
}

TEST(Lagrange, InteriorNodeCounts) {
  for (int k = 1; k <= 3; ++k) {
    EXPECT_EQ(build_lagrange_space(build_box_mesh(2, 3), k).size, (3 * k - 1) * (3 * k - 1));
  }
  EXPECT_EQ(build_lagrange_space(build_box_mesh(3, 2), 2).size, 27);
  EXPECT_THROW(build_lagrange_space(build_box_mesh(2, 1), 0), Error);
}

TEST(Lagrange, NodalBasisIsContinuousAcrossFaces) {
  const SimplicialMesh mesh = build_box_mesh(2, 2);
  const LagrangeSpace sp = build_lagrange_space(mesh, 3);
  std::mt19937 rng(5);
  const Vec u = random_vector(rng, sp.size);
  BasisJet a, b;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    if (mesh.face_boundary[f]) continue;
    const int c0 = mesh.face_cells[f][0], c1 = mesh.face_cells[f][1];
    const Vec x = mesh.face_vertices(f) * Vec::Constant(2, 0.5) + 0.1 * (mesh.coords.col(mesh.faces[f][0]) - mesh.coords.col(mesh.faces[f][1]));
    auto value = [&](int c, BasisJet& j) {
      basis_jet(sp.cell_basis[c], x, 0, j);
      double v = 0.0;
      for (size_t i = 0; i < sp.cell_dofs[c].size(); ++i)
        if (sp.cell_dofs[c][i] >= 0) v += j.val(0, i) * u(sp.cell_dofs[c][i]);
      return v;
    };
    EXPECT_NEAR(value(c0, a), value(c1, b), 1e-12);
  }
}

TEST(Cdg, StiffnessEqualsWeakHessianOfEmbedding) {
  struct Case {
    int dim, n, k;
  };
  for (const Case& cs : {Case{2, 2, 2}, Case{2, 2, 3}, Case{3, 1, 2}}) {
    const Discretization disc(build_box_mesh(cs.dim, cs.n), standard_scheme(cs.k));
    const LagrangeSpace sp = build_lagrange_space(disc.mesh(), cs.k);
    const SparseMat E = lagrange_to_multipliers(disc, sp);
    const SparseMat K = assemble_wg_stiffness(disc, true);
    const Mat lhs = Mat(assemble_cdg_stiffness(disc, sp));
    const Mat rhs = Mat(E.transpose() * K * E);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9 * rhs.cwiseAbs().maxCoeff())
        << cs.dim << "D k=" << cs.k;
  }
}

TEST(Cdg, RequiresStandardScheme) {
  const Discretization disc(build_box_mesh(2, 2), rt_scheme(2));
  EXPECT_THROW(solve_cdg(disc, sine_case(2)), Error);
  const Discretization low(build_box_mesh(2, 2), standard_scheme(1));
  EXPECT_THROW(solve_cdg(low, sine_case(2)), Error);
}

TEST(Cdg, ConvergesForQuadratics) {
  const ManufacturedCase mc = sine_case(2);
  std::vector<double> h, e;
  for (int n : {4, 8, 16}) {
    const Discretization disc(build_box_mesh(2, n), standard_scheme(2));
    h.push_back(max_cell_diameter(disc.mesh()));
    e.push_back(solve_cdg(disc, mc).energy_error);
  }
  EXPECT_GT(fit_rate(h, e), 0.8);
}

TEST(Mwx, DirectSolveMatchesLowestOrderScheme) {
  for (int n : {2, 3}) {
    const Discretization disc(build_box_mesh(2, n), standard_scheme(0));
    const ManufacturedCase mc = sine_case(2);
    const Vec direct = solve_mwx_direct(disc, mc.f);
    const DiscreteSolution wg = solve_hybridized(disc, mc.f);
    const SparseMat H = assemble_weak_hessian(disc, true);
    EXPECT_LT((H * (direct - wg.u)).norm(), 1e-9 * (H * wg.u).norm()) << n;
  }
  const Discretization wrong(build_box_mesh(2, 2), standard_scheme(1));
  EXPECT_THROW(solve_mwx_direct(wrong, sine_case(2).f), Error);
}
