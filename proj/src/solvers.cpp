#include "divdiv/solvers.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <set>

namespace divdiv {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

SparseMat from_triplets(int rows, int cols, const Triplets& t) {
  SparseMat m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

int local_face_index(const SimplicialMesh& mesh, int c, int f) {
  const auto& cf = mesh.cell_faces[c];
  for (int i = 0; i < static_cast<int>(cf.size()); ++i)
    if (cf[i] == f) return i;
  throw Error(ErrorKind::OutOfRange, "face not in cell");
}

Eigen::Map<const Vec> flat(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

// sin^2 profile and its derivatives.
struct Profile {
  double g, g1, g2, g4;
  explicit Profile(double x) {
    const double s = std::sin(M_PI * x), c2 = std::cos(2 * M_PI * x);
    g = s * s;
    g1 = M_PI * std::sin(2 * M_PI * x);
    g2 = 2 * M_PI * M_PI * c2;
    g4 = -8 * std::pow(M_PI, 4) * c2;
  }
};

double product_except(const std::vector<Profile>& p, int i, int j) {
  double v = 1.0;
  for (int a = 0; a < static_cast<int>(p.size()); ++a)
    if (a != i && a != j) v *= p[a].g;
  return v;
}

std::vector<Profile> profiles(const Vec& x) {
  std::vector<Profile> p;
  for (int i = 0; i < x.size(); ++i) p.emplace_back(x(i));
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------

ManufacturedCase sine_case(int dim) {
  if (dim != 2 && dim != 3) throw Error(ErrorKind::UnsupportedDimension, "manufactured cases need d = 2 or 3");
  ManufacturedCase mc;
  mc.dim = dim;
  mc.name = "sine";
  mc.u.value = [](const Vec& x) { return product_except(profiles(x), -1, -1); };
  mc.u.gradient = [](const Vec& x) {
    const auto p = profiles(x);
    Vec g(x.size());
    for (int i = 0; i < x.size(); ++i) g(i) = p[i].g1 * product_except(p, i, -1);
    return g;
  };
  mc.u.hessian = [](const Vec& x) {
    const auto p = profiles(x);
    const int d = static_cast<int>(x.size());
    Mat h(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        h(i, j) = i == j ? p[i].g2 * product_except(p, i, -1) : p[i].g1 * p[j].g1 * product_except(p, i, j);
    return h;
  };
  mc.f = [](const Vec& x) {
    const auto p = profiles(x);
    const int d = static_cast<int>(x.size());
    double f = 0.0;
    for (int i = 0; i < d; ++i) {
      f += p[i].g4 * product_except(p, i, -1);
      for (int j = 0; j < d; ++j)
        if (j != i) f += p[i].g2 * p[j].g2 * product_except(p, i, j);
    }
    return f;
  };
  return mc;
}

ManufacturedCase zero_case(int dim) {
  if (dim != 2 && dim != 3) throw Error(ErrorKind::UnsupportedDimension, "manufactured cases need d = 2 or 3");
  ManufacturedCase mc;
  mc.dim = dim;
  mc.name = "zero";
  mc.u.value = [](const Vec&) { return 0.0; };
  mc.u.gradient = [](const Vec& x) { return Vec::Zero(x.size()); };
  mc.u.hessian = [](const Vec& x) { return Mat::Zero(x.size(), x.size()); };
  mc.f = [](const Vec&) { return 0.0; };
  return mc;
}

ManufacturedCase make_case(const std::string& name, int dim) {
  if (name == "sine") return sine_case(dim);
  if (name == "zero") return zero_case(dim);
  throw Error(ErrorKind::ConfigError, "unknown manufactured case '" + name + "'");
}

double manufactured_self_check(const ManufacturedCase& mc, int points, unsigned seed) {
  const int d = mc.dim;
  const double h = 1e-4;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(0.05, 0.95);
  auto rel = [](double approx, double exact) { return std::abs(approx - exact) / std::max(1.0, std::abs(exact)); };
  auto laplacian = [&](const Vec& x) { return mc.u.hessian(x).trace(); };
  double worst = 0.0;
  for (int n = 0; n < points; ++n) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x(i) = uni(rng);
    const Vec g = mc.u.gradient(x);
    const Mat H = mc.u.hessian(x);
    double bilap = 0.0;
    for (int i = 0; i < d; ++i) {
      Vec xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      worst = std::max(worst, rel((mc.u.value(xp) - mc.u.value(xm)) / (2 * h), g(i)));
      const Vec dg = (mc.u.gradient(xp) - mc.u.gradient(xm)) / (2 * h);
      for (int j = 0; j < d; ++j) worst = std::max(worst, rel(dg(j), H(j, i)));
      bilap += (laplacian(xp) - 2 * laplacian(x) + laplacian(xm)) / (h * h);
    }
    worst = std::max(worst, rel(bilap, mc.f(x)));
  }
  return worst;
}

// ---------------------------------------------------------------------------

Vec assemble_load(const Discretization& disc, const std::function<double(const Vec&)>& f, int degree) {
  const SimplicialMesh& mesh = disc.mesh();
  const int d = mesh.dim;
  const int r = disc.spec().r;
  const int nc = mesh.num_cells();
  std::vector<Vec> local(nc);
  parallel_for(nc, [&](int c) {
    const CellGeometry& g = disc.geometry(c);
    const MappedQuadrature q = carrier_quadrature(g.cell, degree);
    const int ncell = disc.cell_block();
    Vec moments = Vec::Zero(ncell);
    Vec cr = Vec::Zero(d + 1);  // (f, phi_i - Q_r phi_i) for phi_i = 1 - d lambda_i
    double fmean = 0.0;
    BasisJet jet;
    for (int p = 0; p < q.size(); ++p) {
      const Vec x = q.points.col(p);
      const double fv = q.weights(p) * f(x);
      if (ncell > 0) {
        basis_jet(disc.cell_basis(c), x, 0, jet);
        moments += fv * jet.val.row(0).transpose();
      }
      if (r < 1) {
        const Vec lam = barycentric(g.cell, x);
        for (int i = 0; i <= d; ++i) cr(i) += fv * (1.0 - d * lam(i));
        fmean += fv;
      }
    }
    // Q_0 phi_i is the cell mean of phi_i, which is 1/(d+1).
    if (r == 0) cr.array() -= fmean / (d + 1);
    Vec out = disc.cr_map(c).transpose() * cr;
    out.head(ncell) += moments;
    local[c] = std::move(out);
  });
  Vec b = Vec::Zero(disc.multiplier_size(true));
  for (int c = 0; c < nc; ++c) {
    const std::vector<int> dofs = disc.local_dofs(c, true);
    for (size_t j = 0; j < dofs.size(); ++j)
      if (dofs[j] >= 0) b(dofs[j]) += local[c](j);
  }
  return b;
}

Vec solve_spd(const SparseMat& A, const Vec& b, const SolveOptions& options, std::string* used, int* iterations) {
  if (A.rows() == 0) return Vec::Zero(0);
  if (options.solver == LinearSolver::Cholesky) {
    Eigen::SimplicialLDLT<SparseMat> ldlt(A);
    if (ldlt.info() == Eigen::Success) {
      Vec x = ldlt.solve(b);
      const double res = (A * x - b).norm();
      if (ldlt.info() == Eigen::Success && std::isfinite(res) && res <= 1e-8 * std::max(1.0, b.norm())) {
        if (used) *used = "cholesky";
        if (iterations) *iterations = 0;
        return x;
      }
    }
  }
  Eigen::ConjugateGradient<SparseMat, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(options.cg_tolerance);
  cg.setMaxIterations(options.cg_max_iterations);
  cg.compute(A);
  Vec x = cg.solve(b);
  if (cg.info() != Eigen::Success)
    throw Error(ErrorKind::SolverFailure, "conjugate gradients stopped after " + std::to_string(cg.iterations()) +
                                              " iterations with relative residual " + std::to_string(cg.error()));
  if (used) *used = "cg";
  if (iterations) *iterations = static_cast<int>(cg.iterations());
  return x;
}

DiscreteSolution solve_hybridized(const Discretization& disc, const std::function<double(const Vec&)>& f,
                                  const SolveOptions& options) {
  DiscreteSolution sol;
  sol.spec = disc.spec();
  const auto t0 = Clock::now();
  const SparseMat K = assemble_wg_stiffness(disc, true);
  const Vec b = assemble_load(disc, f, 2 * disc.spec().k + options.load_degree_extra);
  sol.assemble_seconds = seconds_since(t0);

  const auto t1 = Clock::now();
  sol.u = solve_spd(K, b, options, &sol.solver_used, &sol.iterations);
  sol.solve_seconds = seconds_since(t1);

  const int nc = disc.mesh().num_cells();
  sol.sigma = Vec::Zero(disc.stress_size());
  for (int c = 0; c < nc; ++c)
    sol.sigma.segment(disc.stress_offset(c), disc.stress_local_size()) =
        -disc.local_hessian(c) * gather_local(disc, c, sol.u, true);
  return sol;
}

void postprocess(const Discretization& disc, DiscreteSolution& sol) {
  const SimplicialMesh& mesh = disc.mesh();
  const int d = mesh.dim;
  const int k = disc.spec().k;
  const int r = disc.spec().r;
  const int nc = mesh.num_cells();
  sol.post.assign(nc, {});
  parallel_for(nc, [&](int c) {
    const CellGeometry& g = disc.geometry(c);
    const TensorPolyBasis P = orthonormalize(make_basis(SpaceId::PScalar, g.cell, k + 2));
    const TensorPolyBasis HP = differentiate(P, DiffOp::Hessian);
    const TensorPolyBasis P1 = orthonormalize(make_basis(SpaceId::PScalar, g.cell, 1));
    const int np = P.size();

    const Vec ul = gather_local(disc, c, sol.u, true);
    const Vec sig = sol.sigma.segment(disc.stress_offset(c), disc.stress_local_size());
    const Vec means = disc.cr_map(c) * ul;

    // P_1 moments of u_0 + (I - Q_r) u^CR.
    Vec moments = Vec::Zero(d + 1);
    const MappedQuadrature q = carrier_quadrature(g.cell, std::max(r, 1) + 1);
    const double cr_mean = means.sum() / (d + 1);
    BasisJet jet, pj;
    for (int p = 0; p < q.size(); ++p) {
      const Vec x = q.points.col(p);
      double v = 0.0;
      if (disc.cell_block() > 0) {
        basis_jet(disc.cell_basis(c), x, 0, jet);
        v += jet.val.row(0).dot(ul.head(disc.cell_block()));
      }
      if (r < 0) v += cr_value(g, means, x);
      if (r == 0) v += cr_value(g, means, x) - cr_mean;
      basis_jet(P1, x, 0, pj);
      moments += q.weights(p) * v * pj.val.row(0).transpose();
    }

    // The Hessian block scales like h^-4; rescale it to balance the moment rows.
    const double h4 = std::pow(g.cell.diameter, 4);
    Mat A = Mat::Zero(np + d + 1, np + d + 1);
    A.topLeftCorner(np, np) = h4 * gram_matrix(HP);
    const Mat C = gram_matrix(P, P1);
    A.topRightCorner(np, d + 1) = C;
    A.bottomLeftCorner(d + 1, np) = C.transpose();
    Vec rhs(np + d + 1);
    rhs.head(np) = -h4 * gram_matrix(HP, disc.stress_basis(c)) * sig;
    rhs.tail(d + 1) = moments;
    const Vec x = A.partialPivLu().solve(rhs);
    sol.post[c] = combine(P, x.head(np));
  });
}

ErrorRow compute_errors(const Discretization& disc, const DiscreteSolution& sol, const ManufacturedCase& mc,
                        int quadrature_degree) {
  const int k = disc.spec().k;
  if (quadrature_degree < 2 * k + 6)
    throw Error(ErrorKind::QuadratureShortfall, "error quadrature of degree " + std::to_string(quadrature_degree) +
                                                    " is below the required 2k+6 = " + std::to_string(2 * k + 6));
  const SimplicialMesh& mesh = disc.mesh();
  const int nc = mesh.num_cells();
  const int ns = disc.stress_local_size();
  const int degree = std::min(quadrature_degree, kMaxQuadratureDegree);

  const Vec qu = project_QM(disc, mc.u, true, std::max(8, degree - k));
  const Vec diff = qu - sol.u;
  const Vec w = disc.weights(true);

  std::vector<std::array<double, 4>> parts(nc);
  parallel_for(nc, [&](int c) {
    const CellGeometry& g = disc.geometry(c);
    const MappedQuadrature q = carrier_quadrature(g.cell, degree);
    const Vec sig = sol.sigma.segment(disc.stress_offset(c), ns);
    const bool has_post = !sol.post.empty();
    BasisJet jet, pj;
    double es = 0.0, eh2 = 0.0, el2 = 0.0;
    for (int p = 0; p < q.size(); ++p) {
      const Vec x = q.points.col(p);
      basis_jet(disc.stress_basis(c), x, 0, jet);
      const Vec s_err = flat(mc.sigma(x)) - jet.val * sig;
      es += q.weights(p) * s_err.squaredNorm();
      if (has_post) {
        basis_jet(sol.post[c], x, 2, pj);
        const Mat H = mc.u.hessian(x);
        double h2 = 0.0;
        for (int a = 0; a < g.dim; ++a)
          for (int b = 0; b < g.dim; ++b) h2 += std::pow(H(a, b) - pj.d2[a * g.dim + b](0, 0), 2);
        eh2 += q.weights(p) * h2;
        el2 += q.weights(p) * std::pow(mc.u.value(x) - pj.val(0, 0), 2);
      }
    }
    const Vec wh = disc.local_hessian(c) * gather_local(disc, c, diff, true);
    parts[c] = {es, wh.squaredNorm(), eh2, el2};
  });

  ErrorRow row;
  row.h = max_cell_diameter(mesh);
  row.unknowns = static_cast<int>(sol.u.size());
  double sums[4] = {0, 0, 0, 0};
  for (const auto& p : parts)
    for (int i = 0; i < 4; ++i) sums[i] += p[i];
  row.err_sigma = std::sqrt(sums[0]);
  row.err_hess = std::sqrt(sums[1]);
  row.err_pp_h2 = std::sqrt(sums[2]);
  row.err_pp_l2 = std::sqrt(sums[3]);
  row.err_u0h = std::sqrt(diff.dot(w.cwiseProduct(diff)));
  row.assemble_seconds = sol.assemble_seconds;
  row.solve_seconds = sol.solve_seconds;
  return row;
}

double fit_rate(const std::vector<double>& h, const std::vector<double>& err, int last) {
  if (h.size() != err.size()) throw Error(ErrorKind::ShapeMismatch, "rate fit needs matching h and error lists");
  const int n = static_cast<int>(h.size());
  const int m = std::min(n, last);
  if (m < 2) throw Error(ErrorKind::OutOfRange, "rate fit needs at least two levels");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = n - m; i < n; ++i) {
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

double max_cell_diameter(const SimplicialMesh& mesh) {
  double h = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) h = std::max(h, simplex_diameter(mesh.cell_vertices(c)));
  return h;
}

// ---------------------------------------------------------------------------

namespace {

void multi_indices(int parts, int total, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == parts - 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int a = total; a >= 0; --a) {
    cur.push_back(a);
    multi_indices(parts, total - a, cur, out);
    cur.pop_back();
  }
}

}  // namespace

LagrangeSpace build_lagrange_space(const SimplicialMesh& mesh, int k) {
  if (k < 1 || k > 6) throw Error(ErrorKind::UnsupportedDegree, "Lagrange degree must lie in 1..6");
  const int d = mesh.dim;
  LagrangeSpace sp;
  sp.k = k;

  // Every vertex subset of a boundary face supports only boundary nodes.
  std::set<std::vector<int>> boundary_supports;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    if (!mesh.face_boundary[f]) continue;
    const auto& fv = mesh.faces[f];
    for (int mask = 1; mask < (1 << fv.size()); ++mask) {
      std::vector<int> s;
      for (size_t i = 0; i < fv.size(); ++i)
        if (mask & (1 << i)) s.push_back(fv[i]);
      boundary_supports.insert(s);
    }
  }

  std::vector<std::vector<int>> alphas;
  std::vector<int> cur;
  multi_indices(d + 1, k, cur, alphas);

  std::map<std::vector<int>, int> ids;
  const int nc = mesh.num_cells();
  sp.cell_dofs.assign(nc, {});
  for (int c = 0; c < nc; ++c) {
    const auto& cv = mesh.cells[c];
    for (const auto& a : alphas) {
      std::vector<int> key, support;
      for (int i = 0; i <= d; ++i)
        if (a[i] > 0) {
          key.push_back(cv[i]);
          key.push_back(a[i]);
          support.push_back(cv[i]);
        }
      if (boundary_supports.count(support)) {
        sp.cell_dofs[c].push_back(-1);
        continue;
      }
      auto it = ids.find(key);
      if (it == ids.end()) it = ids.emplace(key, static_cast<int>(ids.size())).first;
      sp.cell_dofs[c].push_back(it->second);
    }
  }
  sp.size = static_cast<int>(ids.size());

  sp.cell_basis.resize(nc);
  parallel_for(nc, [&](int c) {
    const Mat v = mesh.cell_vertices(c);
    const Carrier car = make_carrier(v, ChartOrigin::Centroid);
    const TensorPolyBasis P = make_basis(SpaceId::PScalar, car, k);
    const int n = P.size();
    Mat V(n, n);
    BasisJet jet;
    for (int a = 0; a < n; ++a) {
      Vec x = Vec::Zero(d);
      for (int i = 0; i <= d; ++i) x += alphas[a][i] * v.col(i) / k;
      basis_jet(P, x, 0, jet);
      V.row(a) = jet.val.row(0);
    }
    sp.cell_basis[c] = combine(P, V.inverse());
  });
  return sp;
}

namespace {

void check_cdg(const Discretization& disc, const LagrangeSpace& space) {
  const SchemeSpec& s = disc.spec();
  if (s.shape != ShapeKind::Pk || s.k < 2 || s.r != s.k - 2 || space.k != s.k)
    throw Error(ErrorKind::Incompatibility, "C0 DG needs the standard scheme of degree k >= 2 with Lagrange degree k");
}

// Normal-derivative jump and averaged normal-normal second derivative on a
// face at one point, as rows over the concatenated nodes of the adjacent cells.
struct FaceJet {
  std::vector<int> ids;
  Eigen::RowVectorXd jump, avg_nn;
};

void face_jet(const Discretization& disc, const LagrangeSpace& space, int f, const Vec& x, FaceJet& out) {
  const SimplicialMesh& mesh = disc.mesh();
  const int d = mesh.dim;
  const Vec& nf = disc.frames().faces[f].normal;
  const bool boundary = mesh.face_boundary[f];
  out.ids.clear();
  std::vector<Eigen::RowVectorXd> jumps, nns;
  BasisJet jet;
  for (int c : mesh.face_cells[f]) {
    if (c < 0) continue;
    const Vec& nout = disc.geometry(c).normals[local_face_index(mesh, c, f)];
    basis_jet(space.cell_basis[c], x, 2, jet);
    Eigen::RowVectorXd dn = Eigen::RowVectorXd::Zero(jet.val.cols());
    Eigen::RowVectorXd nn = Eigen::RowVectorXd::Zero(jet.val.cols());
    for (int a = 0; a < d; ++a) {
      dn += nout(a) * jet.d1[a].row(0);
      for (int b = 0; b < d; ++b) nn += nf(a) * nf(b) * jet.d2[a * d + b].row(0);
    }
    jumps.push_back(boundary ? Eigen::RowVectorXd(2.0 * dn) : dn);
    nns.push_back(0.5 * nn);
    out.ids.insert(out.ids.end(), space.cell_dofs[c].begin(), space.cell_dofs[c].end());
  }
  const int n = static_cast<int>(out.ids.size());
  out.jump.resize(n);
  out.avg_nn.resize(n);
  int at = 0;
  for (size_t t = 0; t < jumps.size(); ++t) {
    out.jump.segment(at, jumps[t].size()) = jumps[t];
    out.avg_nn.segment(at, nns[t].size()) = nns[t];
    at += static_cast<int>(jumps[t].size());
  }
}

// Lifting of the jumps on the faces of cell c into the local P_k(S) basis.
void cell_lifting(const Discretization& disc, const LagrangeSpace& space, int c, Mat& L, std::vector<int>& ids) {
  const SimplicialMesh& mesh = disc.mesh();
  const TensorPolyBasis& sb = disc.stress_basis(c);
  const int k = space.k;
  std::vector<Mat> blocks;
  ids.clear();
  FaceJet fj;
  BasisJet jet;
  for (int i = 0; i <= mesh.dim; ++i) {
    const int f = mesh.cell_faces[c][i];
    const Vec& nf = disc.frames().faces[f].normal;
    const MappedQuadrature q = carrier_quadrature(face_carrier(mesh, f), 2 * k);
    Mat block;
    for (int p = 0; p < q.size(); ++p) {
      const Vec x = q.points.col(p);
      face_jet(disc, space, f, x, fj);
      basis_jet(sb, x, 0, jet);
      const Mat contrib = q.weights(p) * normal_normal(jet, nf).transpose() * fj.jump;
      if (block.size() == 0) block = contrib;
      else block += contrib;
    }
    blocks.push_back(block);
    ids.insert(ids.end(), fj.ids.begin(), fj.ids.end());
  }
  L = Mat::Zero(sb.size(), static_cast<int>(ids.size()));
  int at = 0;
  for (const Mat& b : blocks) {
    L.middleCols(at, b.cols()) = b;
    at += static_cast<int>(b.cols());
  }
}

void add_block(Triplets& t, const std::vector<int>& rows, const std::vector<int>& cols, const Mat& m) {
  for (size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] < 0) continue;
    for (size_t i = 0; i < rows.size(); ++i)
      if (rows[i] >= 0 && m(i, j) != 0.0) t.emplace_back(rows[i], cols[j], m(i, j));
  }
}

}  // namespace

SparseMat assemble_cdg_stiffness(const Discretization& disc, const LagrangeSpace& space) {
  check_cdg(disc, space);
  const SimplicialMesh& mesh = disc.mesh();
  const int nc = mesh.num_cells();
  const int k = space.k;

  std::vector<Triplets> per_cell(nc);
  parallel_for(nc, [&](int c) {
    Triplets& t = per_cell[c];
    const Mat vol = gram_matrix(differentiate(space.cell_basis[c], DiffOp::Hessian));
    add_block(t, space.cell_dofs[c], space.cell_dofs[c], vol);
    Mat L;
    std::vector<int> ids;
    cell_lifting(disc, space, c, L, ids);
    add_block(t, ids, ids, 0.25 * L.transpose() * L);
  });

  std::vector<Triplets> per_face(mesh.num_faces());
  parallel_for(mesh.num_faces(), [&](int f) {
    const MappedQuadrature q = carrier_quadrature(face_carrier(mesh, f), 2 * k);
    FaceJet fj;
    Mat m;
    for (int p = 0; p < q.size(); ++p) {
      face_jet(disc, space, f, q.points.col(p), fj);
      const Mat contrib = -q.weights(p) * (fj.jump.transpose() * fj.avg_nn + fj.avg_nn.transpose() * fj.jump);
      if (m.size() == 0) m = contrib;
      else m += contrib;
    }
    add_block(per_face[f], fj.ids, fj.ids, m);
  });

  Triplets all;
  for (auto& t : per_cell) all.insert(all.end(), t.begin(), t.end());
  for (auto& t : per_face) all.insert(all.end(), t.begin(), t.end());
  return from_triplets(space.size, space.size, all);
}

SparseMat lagrange_to_multipliers(const Discretization& disc, const LagrangeSpace& space) {
  check_cdg(disc, space);
  const SimplicialMesh& mesh = disc.mesh();
  const EntityFrames& fr = disc.frames();
  const MultiplierNumbering& num = disc.numbering(true);
  const int k = space.k;
  Triplets t;
  auto range = [](int start, int n) {
    std::vector<int> r(n);
    for (int i = 0; i < n; ++i) r[i] = start + i;
    return r;
  };

  for (int c = 0; c < mesh.num_cells(); ++c)
    add_block(t, range(num.cell_offset[c], disc.cell_block()), space.cell_dofs[c],
              gram_matrix(disc.cell_basis(c), space.cell_basis[c]));

  BasisJet jet, qj;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const int off = num.face_offset[f];
    if (off < 0) continue;
    const Vec& nf = fr.faces[f].normal;
    const MappedQuadrature q = carrier_quadrature(face_carrier(mesh, f), 2 * k);
    const int c0 = mesh.face_cells[f][0];
    Mat mb = Mat::Zero(disc.b_block(), space.cell_dofs[c0].size());
    for (int c : mesh.face_cells[f]) {
      Mat mn = Mat::Zero(disc.n_block(), space.cell_dofs[c].size());
      for (int p = 0; p < q.size(); ++p) {
        const Vec x = q.points.col(p);
        basis_jet(space.cell_basis[c], x, 1, jet);
        if (c == c0 && disc.b_block() > 0) {
          basis_jet(disc.face_b_basis(f), x, 0, qj);
          mb += q.weights(p) * qj.val.transpose() * jet.val;
        }
        Eigen::RowVectorXd dn = Eigen::RowVectorXd::Zero(jet.val.cols());
        for (int a = 0; a < mesh.dim; ++a) dn += nf(a) * jet.d1[a].row(0);
        basis_jet(disc.face_n_basis(f), x, 0, qj);
        mn += 0.5 * q.weights(p) * qj.val.transpose() * dn;
      }
      add_block(t, range(off + disc.b_block(), disc.n_block()), space.cell_dofs[c], mn);
    }
    add_block(t, range(off, disc.b_block()), space.cell_dofs[c0], mb);
  }

  for (int e = 0; e < mesh.num_ridges(); ++e) {
    const int off = num.ridge_offset[e];
    if (off < 0) continue;
    const int c = ridge_patch(mesh, e)[0];
    const MappedQuadrature q = carrier_quadrature(ridge_carrier(mesh, fr, e), 2 * k);
    Mat m = Mat::Zero(disc.e_block(), space.cell_dofs[c].size());
    for (int p = 0; p < q.size(); ++p) {
      basis_jet(space.cell_basis[c], q.points.col(p), 0, jet);
      basis_jet(disc.ridge_basis(e), q.points.col(p), 0, qj);
      m += q.weights(p) * qj.val.transpose() * jet.val;
    }
    add_block(t, range(off, disc.e_block()), space.cell_dofs[c], m);
  }
  return from_triplets(num.size, space.size, t);
}

CdgSolution solve_cdg(const Discretization& disc, const ManufacturedCase& mc, const SolveOptions& options) {
  const int k = disc.spec().k;
  const SimplicialMesh& mesh = disc.mesh();
  const int nc = mesh.num_cells();
  CdgSolution sol;
  sol.k = k;

  const auto t0 = Clock::now();
  const LagrangeSpace space = build_lagrange_space(mesh, k);
  const SparseMat A = assemble_cdg_stiffness(disc, space);
  // Load (f, Q_{k-2} v): project f onto the orthonormal P_{k-2} cell basis.
  std::vector<Vec> local(nc);
  parallel_for(nc, [&](int c) {
    const MappedQuadrature q = carrier_quadrature(disc.geometry(c).cell, 2 * k + options.load_degree_extra);
    Vec fm = Vec::Zero(disc.cell_block());
    BasisJet jet;
    for (int p = 0; p < q.size(); ++p) {
      basis_jet(disc.cell_basis(c), q.points.col(p), 0, jet);
      fm += q.weights(p) * mc.f(q.points.col(p)) * jet.val.row(0).transpose();
    }
    local[c] = gram_matrix(space.cell_basis[c], disc.cell_basis(c)) * fm;
  });
  Vec b = Vec::Zero(space.size);
  for (int c = 0; c < nc; ++c)
    for (size_t j = 0; j < space.cell_dofs[c].size(); ++j)
      if (space.cell_dofs[c][j] >= 0) b(space.cell_dofs[c][j]) += local[c](j);
  sol.assemble_seconds = seconds_since(t0);

  const auto t1 = Clock::now();
  sol.u = solve_spd(A, b, options);
  sol.solve_seconds = seconds_since(t1);

  auto coeff = [&](const std::vector<int>& ids) {
    Vec v = Vec::Zero(static_cast<int>(ids.size()));
    for (size_t j = 0; j < ids.size(); ++j)
      if (ids[j] >= 0) v(j) = sol.u(ids[j]);
    return v;
  };
  std::vector<double> parts(nc);
  parallel_for(nc, [&](int c) {
    const TensorPolyBasis& sb = disc.stress_basis(c);
    Mat L;
    std::vector<int> ids;
    cell_lifting(disc, space, c, L, ids);
    const TensorPolyBasis hess = differentiate(space.cell_basis[c], DiffOp::Hessian);
    const Vec uh = coeff(space.cell_dofs[c]);
    // Discrete Hessian in the orthonormal P_k(S) basis.
    const Vec dh = gram_matrix(sb, hess) * uh - 0.5 * L * coeff(ids);
    const MappedQuadrature q = carrier_quadrature(disc.geometry(c).cell, 2 * k + 6);
    BasisJet jet;
    double e = 0.0;
    for (int p = 0; p < q.size(); ++p) {
      basis_jet(sb, q.points.col(p), 0, jet);
      e += q.weights(p) * (flat(mc.u.hessian(q.points.col(p))) - jet.val * dh).squaredNorm();
    }
    parts[c] = e;
  });
  double total = 0.0;
  for (double e : parts) total += e;
  sol.energy_error = std::sqrt(total);
  return sol;
}

// ---------------------------------------------------------------------------

Vec solve_mwx_direct(const Discretization& disc, const std::function<double(const Vec&)>& f,
                     const SolveOptions& options) {
  const SchemeSpec& s = disc.spec();
  if (s.shape != ShapeKind::Pk || s.k != 0)
    throw Error(ErrorKind::Incompatibility, "the direct quadratic element pairs with the k = 0 standard scheme");
  const SimplicialMesh& mesh = disc.mesh();
  const EntityFrames& fr = disc.frames();
  const int d = mesh.dim;
  const int nc = mesh.num_cells();

  // Global unknowns: face means of the normal derivative, ridge means of the value.
  std::vector<int> face_id(mesh.num_faces(), -1), ridge_id(mesh.num_ridges(), -1);
  int n = 0;
  for (int f = 0; f < mesh.num_faces(); ++f)
    if (!mesh.face_boundary[f]) face_id[f] = n++;
  for (int e = 0; e < mesh.num_ridges(); ++e)
    if (!mesh.ridge_boundary[e]) ridge_id[e] = n++;

  std::vector<Triplets> per_cell(nc);
  std::vector<Vec> loads(nc);
  std::vector<std::vector<int>> dofs(nc);
  parallel_for(nc, [&](int c) {
    const CellGeometry& g = disc.geometry(c);
    const TensorPolyBasis quad = make_basis(SpaceId::PScalar, g.cell, 2);
    const int nq = quad.size();
    Mat D(nq, nq);
    Mat face_means(d + 1, nq);
    BasisJet jet;
    int row = 0;
    for (int i = 0; i <= d; ++i) {
      const int f = mesh.cell_faces[c][i];
      const Vec& nf = fr.faces[f].normal;
      const MappedQuadrature q = carrier_quadrature(g.faces[i], 2);
      Eigen::RowVectorXd dn = Eigen::RowVectorXd::Zero(nq), mean = Eigen::RowVectorXd::Zero(nq);
      for (int p = 0; p < q.size(); ++p) {
        basis_jet(quad, q.points.col(p), 1, jet);
        for (int a = 0; a < d; ++a) dn += q.weights(p) * nf(a) * jet.d1[a].row(0);
        mean += q.weights(p) * jet.val.row(0);
      }
      D.row(row++) = dn / g.faces[i].measure;
      face_means.row(i) = mean / g.faces[i].measure;
      dofs[c].push_back(face_id[f]);
    }
    for (size_t p = 0; p < g.ridges.size(); ++p) {
      const MappedQuadrature q = carrier_quadrature(g.ridges[p], 2);
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(nq);
      for (int j = 0; j < q.size(); ++j) {
        basis_jet(quad, q.points.col(j), 0, jet);
        mean += q.weights(j) * jet.val.row(0);
      }
      D.row(row++) = mean / g.ridges[p].measure;
      dofs[c].push_back(ridge_id[mesh.cell_ridges[c][p]]);
    }
    const Mat inv = D.inverse();
    const TensorPolyBasis nodal = combine(quad, inv);
    add_block(per_cell[c], dofs[c], dofs[c], gram_matrix(differentiate(nodal, DiffOp::Hessian)));

    // (f, I^CR phi_j) with I^CR phi = sum_i (face mean_i of phi)(1 - d lambda_i).
    Vec fl = Vec::Zero(d + 1);
    const MappedQuadrature q = carrier_quadrature(g.cell, options.load_degree_extra);  // 2k + extra with k = 0
    for (int p = 0; p < q.size(); ++p) {
      const Vec lam = barycentric(g.cell, q.points.col(p));
      const double fv = q.weights(p) * f(q.points.col(p));
      for (int i = 0; i <= d; ++i) fl(i) += fv * (1.0 - d * lam(i));
    }
    loads[c] = (face_means * inv).transpose() * fl;
  });

  Triplets all;
  for (auto& t : per_cell) all.insert(all.end(), t.begin(), t.end());
  const SparseMat A = from_triplets(n, n, all);
  Vec b = Vec::Zero(n);
  for (int c = 0; c < nc; ++c)
    for (size_t j = 0; j < dofs[c].size(); ++j)
      if (dofs[c][j] >= 0) b(dofs[c][j]) += loads[c](j);
  const Vec x = solve_spd(A, b, options);

  // Multiplier coordinates: moments against the constant orthonormal bases.
  const MultiplierNumbering& num = disc.numbering(true);
  Vec out = Vec::Zero(num.size);
  BasisJet qj;
  auto integral = [&](const TensorPolyBasis& basis, const Carrier& car) {
    const MappedQuadrature q = carrier_quadrature(car, 0);
    double v = 0.0;
    for (int p = 0; p < q.size(); ++p) {
      basis_jet(basis, q.points.col(p), 0, qj);
      v += q.weights(p) * qj.val(0, 0);
    }
    return v;
  };
  for (int f = 0; f < mesh.num_faces(); ++f)
    if (face_id[f] >= 0)
      out(num.face_offset[f] + disc.b_block()) = x(face_id[f]) * integral(disc.face_n_basis(f), face_carrier(mesh, f));
  for (int e = 0; e < mesh.num_ridges(); ++e)
    if (ridge_id[e] >= 0)
      out(num.ridge_offset[e]) = x(ridge_id[e]) * integral(disc.ridge_basis(e), ridge_carrier(mesh, fr, e));
  return out;
}

}  // namespace divdiv
