#pragma once

#include <functional>
#include <string>
#include <vector>

#include "divdiv/spaces.hpp"

namespace divdiv {

/// Clamped plate problem with closed-form data: u, its derivatives and f = bilaplacian(u).
struct ManufacturedCase {
  int dim = 2;
  std::string name;
  ScalarField u;
  std::function<double(const Vec&)> f;
  Mat sigma(const Vec& x) const { return -u.hessian(x); }
};

/// u = prod_i sin^2(pi x_i) on the unit box.
ManufacturedCase sine_case(int dim);
/// u = 0, f = 0.
ManufacturedCase zero_case(int dim);
ManufacturedCase make_case(const std::string& name, int dim);

/// Largest relative deviation between the closed forms and central
/// differences (value -> gradient -> Hessian -> bilaplacian) at random points.
double manufactured_self_check(const ManufacturedCase& c, int points, unsigned seed);

enum class LinearSolver { Cholesky, ConjugateGradient };

struct SolveOptions {
  LinearSolver solver = LinearSolver::Cholesky;
  double cg_tolerance = 1e-12;
  int cg_max_iterations = 100000;
  int load_degree_extra = 6;
};

struct DiscreteSolution {
  SchemeSpec spec;
  Vec u;      // interior multiplier vector
  Vec sigma;  // broken stress coefficients, sigma_h = -weak Hessian(u_h)
  std::vector<TensorPolyBasis> post;  // per cell: one P_{k+2} function
  std::string solver_used;
  int iterations = 0;
  double assemble_seconds = 0.0;
  double solve_seconds = 0.0;
};

/// Load vector (f, v_0 + v^CR - Q_r v^CR) over the interior multipliers.
Vec assemble_load(const Discretization& disc, const std::function<double(const Vec&)>& f, int degree);

/// Solves the symmetric positive definite multiplier system and recovers the stress.
DiscreteSolution solve_hybridized(const Discretization& disc, const std::function<double(const Vec&)>& f,
                                  const SolveOptions& options = {});

/// Sparse SPD solve: Cholesky with a CG fallback (or CG only when requested).
Vec solve_spd(const SparseMat& A, const Vec& b, const SolveOptions& options, std::string* used = nullptr,
              int* iterations = nullptr);

/// Cellwise P_{k+2} reconstruction matching -sigma_h in the Hessian inner
/// product and the P_1 moments of u_0 + (I - Q_r) u^CR.
void postprocess(const Discretization& disc, DiscreteSolution& sol);

struct ErrorRow {
  int n = 0;
  double h = 0.0;
  int unknowns = 0;
  double err_sigma = 0.0;
  double err_hess = 0.0;
  double err_u0h = 0.0;
  double err_pp_h2 = 0.0;
  double err_pp_l2 = 0.0;
  double assemble_seconds = 0.0;
  double solve_seconds = 0.0;
};

/// Error norms by cellwise quadrature of the given degree (at least 2k+6).
ErrorRow compute_errors(const Discretization& disc, const DiscreteSolution& sol, const ManufacturedCase& mc,
                        int quadrature_degree);

/// Least-squares slope of log(err) against log(h) over the last `last` levels.
double fit_rate(const std::vector<double>& h, const std::vector<double>& err, int last = 3);

double max_cell_diameter(const SimplicialMesh& mesh);

// ---------------------------------------------------------------------------
// Continuous Lagrange space with zero boundary values.

struct LagrangeSpace {
  int k = 0;
  int size = 0;                                // interior nodes
  std::vector<std::vector<int>> cell_dofs;     // per cell, per local node; -1 on the boundary
  std::vector<TensorPolyBasis> cell_basis;     // nodal basis per cell
};

LagrangeSpace build_lagrange_space(const SimplicialMesh& mesh, int k);

struct CdgSolution {
  int k = 0;
  Vec u;
  double energy_error = 0.0;
  double assemble_seconds = 0.0;
  double solve_seconds = 0.0;
};

/// Stiffness of the C0 DG form: broken Hessian product, symmetric face terms
/// and the cellwise lifting of normal-derivative jumps into P_k(S).
SparseMat assemble_cdg_stiffness(const Discretization& disc, const LagrangeSpace& space);

/// Map from Lagrange coefficients to interior multipliers of the standard
/// scheme: projections on cells, faces and ridges, averaged normal derivative.
SparseMat lagrange_to_multipliers(const Discretization& disc, const LagrangeSpace& space);

/// disc must use standard_scheme(k) with k >= 2.
CdgSolution solve_cdg(const Discretization& disc, const ManufacturedCase& mc, const SolveOptions& options = {});

/// Morley-Wang-Xu element assembled from its own nodal basis; returns the
/// solution in the k = 0 multiplier coordinates of disc.
Vec solve_mwx_direct(const Discretization& disc, const std::function<double(const Vec&)>& f,
                     const SolveOptions& options = {});

}  // namespace divdiv
