#include "divdiv/spaces.hpp"

#include <Eigen/SparseQR>

#include <cmath>
#include <ostream>

namespace divdiv {

std::string SchemeSpec::name() const {
  std::string s = shape == ShapeKind::Pk ? "P" : (shape == ShapeKind::PkPlus ? "P+" : "P1++");
  return s + std::to_string(k) + "/r" + std::to_string(r);
}

namespace {

void check_degree(int k) {
  if (k < 0 || k > 6) throw Error(ErrorKind::UnsupportedDegree, "scheme degree must lie in 0..6");
}

using Triplets = std::vector<Eigen::Triplet<double>>;

SparseMat from_triplets(int rows, int cols, const Triplets& t) {
  SparseMat m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

TensorPolyBasis scalar_orthonormal(const Carrier& carrier, int degree) {
  if (degree < 0) return {};
  return orthonormalize(make_basis(SpaceId::PScalar, carrier, degree));
}

int local_face_index(const SimplicialMesh& mesh, int c, int f) {
  const auto& cf = mesh.cell_faces[c];
  for (int i = 0; i < static_cast<int>(cf.size()); ++i)
    if (cf[i] == f) return i;
  throw Error(ErrorKind::OutOfRange, "face not in cell");
}

int local_ridge_index(const SimplicialMesh& mesh, int c, int e) {
  const auto& cr = mesh.cell_ridges[c];
  for (int p = 0; p < static_cast<int>(cr.size()); ++p)
    if (cr[p] == e) return p;
  throw Error(ErrorKind::OutOfRange, "ridge not in cell");
}

}  // namespace

SchemeSpec standard_scheme(int k) {
  check_degree(k);
  SchemeSpec s;
  s.shape = ShapeKind::Pk;
  s.k = k;
  s.r = k - 2;
  s.deg_b = k - 1;
  s.deg_n = k;
  s.deg_e = k;
  return s;
}

SchemeSpec rt_scheme(int k) {
  check_degree(k);
  if (k < 1) throw Error(ErrorKind::UnsupportedDegree, "enriched stresses need k >= 1");
  SchemeSpec s = standard_scheme(k);
  s.shape = ShapeKind::PkPlus;
  s.r = k - 1;
  return s;
}

SchemeSpec onepp_scheme() {
  SchemeSpec s;
  s.shape = ShapeKind::OnePlusPlus;
  s.k = 1;
  s.r = 1;
  s.deg_b = 1;
  s.deg_n = 1;
  s.deg_e = 1;
  return s;
}

// ---------------------------------------------------------------------------

Discretization::Discretization(SimplicialMesh mesh, SchemeSpec spec) : mesh_(std::move(mesh)), spec_(spec) {
  frames_ = compute_frames(mesh_);
  const int nc = mesh_.num_cells();
  const int d = mesh_.dim;

  face_b_.resize(mesh_.num_faces());
  face_n_.resize(mesh_.num_faces());
  ridge_.resize(mesh_.num_ridges());
  parallel_for(mesh_.num_faces(), [&](int f) {
    const Carrier car = face_carrier(mesh_, f);
    face_b_[f] = scalar_orthonormal(car, spec_.deg_b);
    face_n_[f] = scalar_orthonormal(car, spec_.deg_n);
  });
  parallel_for(mesh_.num_ridges(), [&](int e) { ridge_[e] = scalar_orthonormal(ridge_carrier(mesh_, frames_, e), spec_.deg_e); });

  geom_.resize(nc);
  stress_.resize(nc);
  cell_mult_.resize(nc);
  parallel_for(nc, [&](int c) {
    geom_[c] = make_cell_geometry(mesh_, frames_, c);
    stress_[c] = orthonormalize(shape_basis(spec_.shape, spec_.k, geom_[c].cell));
    cell_mult_[c] = scalar_orthonormal(geom_[c].cell, spec_.r);
  });
  stress_size_ = stress_[0].size();
  n_cell_ = cell_mult_[0].size();
  n_b_ = face_b_.empty() ? 0 : face_b_[0].size();
  n_n_ = face_n_.empty() ? 0 : face_n_[0].size();
  n_e_ = ridge_.empty() ? 0 : ridge_[0].size();

  for (int pass = 0; pass < 2; ++pass) {
    const bool interior = pass == 1;
    MultiplierNumbering& num = interior ? interior_ : full_;
    int next = 0;
    num.cell_offset.assign(nc, -1);
    for (int c = 0; c < nc; ++c) {
      num.cell_offset[c] = next;
      next += n_cell_;
    }
    num.face_offset.assign(mesh_.num_faces(), -1);
    for (int f = 0; f < mesh_.num_faces(); ++f) {
      if (interior && mesh_.face_boundary[f]) continue;
      num.face_offset[f] = next;
      next += n_b_ + n_n_;
    }
    num.ridge_offset.assign(mesh_.num_ridges(), -1);
    for (int e = 0; e < mesh_.num_ridges(); ++e) {
      if (interior && mesh_.ridge_boundary[e]) continue;
      num.ridge_offset[e] = next;
      next += n_e_;
    }
    num.size = next;
  }

  hess_.resize(nc);
  cr_.resize(nc);
  mwx_.resize(nc);
  parallel_for(nc, [&](int c) {
    const CellGeometry& g = geom_[c];
    const TensorPolyBasis& sb = stress_[c];
    Mat G = Mat::Zero(stress_size_, local_size());
    if (n_cell_ > 0) G.leftCols(n_cell_) = gram_matrix(differentiate(sb, DiffOp::DivDiv), cell_mult_[c]);
    BasisJet jet, qj;
    for (int i = 0; i <= d; ++i) {
      const int f = mesh_.cell_faces[c][i];
      const double s = face_sign(c, i);
      const int col = local_face_col(i);
      const MappedQuadrature q = carrier_quadrature(g.faces[i], sb.degree + std::max(spec_.deg_b, spec_.deg_n));
      for (int p = 0; p < q.size(); ++p) {
        const Vec x = q.points.col(p);
        basis_jet(sb, x, n_b_ > 0 ? 1 : 0, jet);
        if (n_b_ > 0) {
          basis_jet(face_b_[f], x, 0, qj);
          G.middleCols(col, n_b_) -= q.weights(p) * effective_shear(jet, g.normals[i], g.faces[i].chart.axes).transpose() * qj.val;
        }
        if (n_n_ > 0) {
          basis_jet(face_n_[f], x, 0, qj);
          G.middleCols(col + n_b_, n_n_) += q.weights(p) * s * normal_normal(jet, g.normals[i]).transpose() * qj.val;
        }
      }
    }
    for (size_t pr = 0; pr < g.ridges.size() && n_e_ > 0; ++pr) {
      const int e = mesh_.cell_ridges[c][pr];
      const int col = local_ridge_col(static_cast<int>(pr));
      const MappedQuadrature q = carrier_quadrature(g.ridges[pr], sb.degree + spec_.deg_e);
      for (int p = 0; p < q.size(); ++p) {
        const Vec x = q.points.col(p);
        basis_jet(sb, x, 0, jet);
        basis_jet(ridge_[e], x, 0, qj);
        G.middleCols(col, n_e_) += q.weights(p) * ridge_trace(jet, g, static_cast<int>(pr)).transpose() * qj.val;
      }
    }
    hess_[c] = std::move(G);

    // Face means of the nonconforming linear reconstruction.
    Mat cr = Mat::Zero(d + 1, local_size());
    if (n_b_ > 0) {
      for (int i = 0; i <= d; ++i) {
        const int f = mesh_.cell_faces[c][i];
        const MappedQuadrature q = carrier_quadrature(g.faces[i], spec_.deg_b);
        Vec integrals = Vec::Zero(n_b_);
        for (int p = 0; p < q.size(); ++p) {
          basis_jet(face_b_[f], q.points.col(p), 0, qj);
          integrals += q.weights(p) * qj.val.row(0).transpose();
        }
        cr.block(i, local_face_col(i), 1, n_b_) = integrals.transpose() / g.faces[i].measure;
      }
    } else {
      // Quadratic reconstruction from normal-derivative and ridge moments.
      const TensorPolyBasis quad = make_basis(SpaceId::PScalar, g.cell, 2);
      const int nq = quad.size();
      Mat D = Mat::Zero(nq, nq);
      std::vector<int> cols;
      int row = 0;
      for (int i = 0; i <= d; ++i) {
        const int f = mesh_.cell_faces[c][i];
        const Vec nf = face_sign(c, i) * g.normals[i];
        const MappedQuadrature q = carrier_quadrature(g.faces[i], 2 + spec_.deg_n);
        for (int p = 0; p < q.size(); ++p) {
          basis_jet(quad, q.points.col(p), 1, jet);
          basis_jet(face_n_[f], q.points.col(p), 0, qj);
          Eigen::RowVectorXd dn = Eigen::RowVectorXd::Zero(nq);
          for (int a = 0; a < d; ++a) dn += nf(a) * jet.d1[a].row(0);
          D.middleRows(row, n_n_) += q.weights(p) * qj.val.transpose() * dn;
        }
        for (int j = 0; j < n_n_; ++j) cols.push_back(local_face_col(i) + n_b_ + j);
        row += n_n_;
      }
      for (size_t pr = 0; pr < g.ridges.size(); ++pr) {
        const int e = mesh_.cell_ridges[c][pr];
        const MappedQuadrature q = carrier_quadrature(g.ridges[pr], 2 + spec_.deg_e);
        for (int p = 0; p < q.size(); ++p) {
          basis_jet(quad, q.points.col(p), 0, jet);
          basis_jet(ridge_[e], q.points.col(p), 0, qj);
          D.middleRows(row, n_e_) += q.weights(p) * qj.val.transpose() * jet.val;
        }
        for (int j = 0; j < n_e_; ++j) cols.push_back(local_ridge_col(static_cast<int>(pr)) + j);
        row += n_e_;
      }
      if (row != nq)
        throw Error(ErrorKind::Unsupported, "quadratic reconstruction needs k = 0 multiplier degrees");
      const Mat inv = D.inverse();
      Mat mwx = Mat::Zero(nq, local_size());
      for (int j = 0; j < nq; ++j) mwx.col(cols[j]) = inv.col(j);
      for (int i = 0; i <= d; ++i) {
        const MappedQuadrature q = carrier_quadrature(g.faces[i], 2);
        Eigen::RowVectorXd integrals = Eigen::RowVectorXd::Zero(nq);
        for (int p = 0; p < q.size(); ++p) {
          basis_jet(quad, q.points.col(p), 0, jet);
          integrals += q.weights(p) * jet.val.row(0);
        }
        cr.row(i) = integrals * mwx / g.faces[i].measure;
      }
      mwx_[c] = std::move(mwx);
    }
    cr_[c] = std::move(cr);
  });
}

int Discretization::local_size() const {
  const int d = mesh_.dim;
  return n_cell_ + (d + 1) * (n_b_ + n_n_) + static_cast<int>(local_pairs(d).size()) * n_e_;
}

int Discretization::local_face_col(int i) const { return n_cell_ + i * (n_b_ + n_n_); }

int Discretization::local_ridge_col(int p) const {
  return n_cell_ + (mesh_.dim + 1) * (n_b_ + n_n_) + p * n_e_;
}

std::vector<int> Discretization::local_dofs(int c, bool interior_only) const {
  const MultiplierNumbering& num = numbering(interior_only);
  std::vector<int> out(local_size(), -1);
  for (int j = 0; j < n_cell_; ++j) out[j] = num.cell_offset[c] + j;
  for (int i = 0; i <= mesh_.dim; ++i) {
    const int off = num.face_offset[mesh_.cell_faces[c][i]];
    if (off < 0) continue;
    for (int j = 0; j < n_b_ + n_n_; ++j) out[local_face_col(i) + j] = off + j;
  }
  for (size_t p = 0; p < mesh_.cell_ridges[c].size(); ++p) {
    const int off = num.ridge_offset[mesh_.cell_ridges[c][p]];
    if (off < 0) continue;
    for (int j = 0; j < n_e_; ++j) out[local_ridge_col(static_cast<int>(p)) + j] = off + j;
  }
  return out;
}

Vec Discretization::weights(bool interior_only) const {
  const MultiplierNumbering& num = numbering(interior_only);
  Vec w = Vec::Ones(num.size);
  for (int f = 0; f < mesh_.num_faces(); ++f) {
    const int off = num.face_offset[f];
    if (off < 0) continue;
    const double h = frames_.faces[f].diameter;
    w.segment(off, n_b_).setConstant(h);
    w.segment(off + n_b_, n_n_).setConstant(h * h * h);
  }
  for (int e = 0; e < mesh_.num_ridges(); ++e) {
    const int off = num.ridge_offset[e];
    if (off < 0) continue;
    const double h = frames_.ridges[e].diameter;
    w.segment(off, n_e_).setConstant(h * h);
  }
  return w;
}

// ---------------------------------------------------------------------------

double cr_value(const CellGeometry& geom, const Vec& m, const Vec& x) {
  const Vec lam = barycentric(geom.cell, x);
  const int d = geom.dim;
  double v = 0.0;
  for (int i = 0; i <= d; ++i) v += m(i) * (1.0 - d * lam(i));
  return v;
}

Vec cr_gradient(const CellGeometry& geom, const Vec& m) {
  Vec g = Vec::Zero(geom.dim);
  for (int i = 0; i <= geom.dim; ++i) g += m(i) * geom.faces[i].measure / geom.cell.measure * geom.normals[i];
  return g;
}

SparseMat weighted_inner_product(const Discretization& disc, bool interior_only) {
  const Vec w = disc.weights(interior_only);
  SparseMat m(w.size(), w.size());
  m.reserve(Eigen::VectorXi::Ones(w.size()));
  for (int i = 0; i < w.size(); ++i) m.insert(i, i) = w(i);
  m.makeCompressed();
  return m;
}

SparseMat assemble_weak_divdiv(const Discretization& disc, bool interior_only) {
  const SimplicialMesh& mesh = disc.mesh();
  const EntityFrames& fr = disc.frames();
  const SchemeSpec& spec = disc.spec();
  const MultiplierNumbering& num = disc.numbering(interior_only);
  const int ns = disc.stress_local_size();
  Triplets t;
  auto put = [&](int row0, int c, const Mat& block) {
    for (int j = 0; j < block.cols(); ++j)
      for (int i = 0; i < block.rows(); ++i)
        if (block(i, j) != 0.0) t.emplace_back(row0 + i, disc.stress_offset(c) + j, block(i, j));
  };

  for (int c = 0; c < mesh.num_cells() && disc.cell_block() > 0; ++c) {
    const TensorPolyBasis dd = differentiate(disc.stress_basis(c), DiffOp::DivDiv);
    put(num.cell_offset[c], c, gram_matrix(disc.cell_basis(c), dd));
  }

  BasisJet jet, qj;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const int off = num.face_offset[f];
    if (off < 0) continue;
    const double h = fr.faces[f].diameter;
    const int nb = disc.b_block(), nn = disc.n_block();
    for (int c : mesh.face_cells[f]) {
      if (c < 0) continue;
      const int i = local_face_index(mesh, c, f);
      const CellGeometry& g = disc.geometry(c);
      const TensorPolyBasis& sb = disc.stress_basis(c);
      // Outward normal of this cell; the u_n unknown refers to n_F.
      const Vec nout = g.normals[i];
      const double s = nout.dot(fr.faces[f].normal) > 0 ? 1.0 : -1.0;
      Mat shear = Mat::Zero(nb, ns), normal = Mat::Zero(nn, ns);
      const MappedQuadrature q = carrier_quadrature(face_carrier(mesh, f), sb.degree + std::max(spec.deg_b, spec.deg_n));
      for (int p = 0; p < q.size(); ++p) {
        const Vec x = q.points.col(p);
        basis_jet(sb, x, nb > 0 ? 1 : 0, jet);
        if (nb > 0) {
          basis_jet(disc.face_b_basis(f), x, 0, qj);
          shear += q.weights(p) * qj.val.transpose() * effective_shear(jet, nout, g.faces[i].chart.axes);
        }
        if (nn > 0) {
          basis_jet(disc.face_n_basis(f), x, 0, qj);
          normal += q.weights(p) * s * qj.val.transpose() * normal_normal(jet, nout);
        }
      }
      if (nb > 0) put(off, c, -shear / h);
      if (nn > 0) put(off + nb, c, normal / (h * h * h));
    }
  }

  const int ne = disc.e_block();
  for (int e = 0; e < mesh.num_ridges() && ne > 0; ++e) {
    const int off = num.ridge_offset[e];
    if (off < 0) continue;
    const double h = fr.ridges[e].diameter;
    const Carrier rc = ridge_carrier(mesh, fr, e);
    for (int c : ridge_patch(mesh, e)) {
      const int p = local_ridge_index(mesh, c, e);
      const CellGeometry& g = disc.geometry(c);
      const TensorPolyBasis& sb = disc.stress_basis(c);
      Mat block = Mat::Zero(ne, ns);
      const MappedQuadrature q = carrier_quadrature(rc, sb.degree + spec.deg_e);
      for (int s = 0; s < q.size(); ++s) {
        const Vec x = q.points.col(s);
        basis_jet(sb, x, 0, jet);
        basis_jet(disc.ridge_basis(e), x, 0, qj);
        block += q.weights(s) * qj.val.transpose() * ridge_trace(jet, g, p);
      }
      put(off, c, block / (h * h));
    }
  }
  return from_triplets(num.size, disc.stress_size(), t);
}

SparseMat assemble_weak_hessian(const Discretization& disc, bool interior_only) {
  Triplets t;
  const int nc = disc.mesh().num_cells();
  for (int c = 0; c < nc; ++c) {
    const Mat& G = disc.local_hessian(c);
    const std::vector<int> dofs = disc.local_dofs(c, interior_only);
    for (int j = 0; j < G.cols(); ++j) {
      if (dofs[j] < 0) continue;
      for (int i = 0; i < G.rows(); ++i)
        if (G(i, j) != 0.0) t.emplace_back(disc.stress_offset(c) + i, dofs[j], G(i, j));
    }
  }
  return from_triplets(disc.stress_size(), disc.multiplier_size(interior_only), t);
}

SparseMat assemble_wg_stiffness(const Discretization& disc, bool interior_only) {
  const int nc = disc.mesh().num_cells();
  std::vector<Triplets> per_cell(nc);
  parallel_for(nc, [&](int c) {
    const Mat& G = disc.local_hessian(c);
    const Mat K = G.transpose() * G;
    const std::vector<int> dofs = disc.local_dofs(c, interior_only);
    Triplets& t = per_cell[c];
    for (int j = 0; j < K.cols(); ++j) {
      if (dofs[j] < 0) continue;
      for (int i = 0; i < K.rows(); ++i)
        if (dofs[i] >= 0 && K(i, j) != 0.0) t.emplace_back(dofs[i], dofs[j], K(i, j));
    }
  });
  Triplets all;
  for (auto& t : per_cell) all.insert(all.end(), t.begin(), t.end());
  const int n = disc.multiplier_size(interior_only);
  return from_triplets(n, n, all);
}

// ---------------------------------------------------------------------------

Vec project_QM(const Discretization& disc, const ScalarField& field, bool interior_only, int extra_degree) {
  const SimplicialMesh& mesh = disc.mesh();
  const EntityFrames& fr = disc.frames();
  const SchemeSpec& spec = disc.spec();
  const MultiplierNumbering& num = disc.numbering(interior_only);
  if (disc.n_block() > 0 && !field.gradient)
    throw Error(ErrorKind::MissingDerivative, "the normal-derivative block needs the field gradient");
  Vec out = Vec::Zero(num.size);
  BasisJet qj;
  if (disc.cell_block() > 0) {
    parallel_for(mesh.num_cells(), [&](int c) {
      const MappedQuadrature q = carrier_quadrature(disc.geometry(c).cell, spec.r + extra_degree);
      Vec acc = Vec::Zero(disc.cell_block());
      BasisJet j;
      for (int p = 0; p < q.size(); ++p) {
        basis_jet(disc.cell_basis(c), q.points.col(p), 0, j);
        acc += q.weights(p) * field.value(q.points.col(p)) * j.val.row(0).transpose();
      }
      out.segment(num.cell_offset[c], disc.cell_block()) = acc;
    });
  }
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const int off = num.face_offset[f];
    if (off < 0) continue;
    const Carrier car = face_carrier(mesh, f);
    const MappedQuadrature q = carrier_quadrature(car, std::max(spec.deg_b, spec.deg_n) + extra_degree);
    for (int p = 0; p < q.size(); ++p) {
      const Vec x = q.points.col(p);
      if (disc.b_block() > 0) {
        basis_jet(disc.face_b_basis(f), x, 0, qj);
        out.segment(off, disc.b_block()) += q.weights(p) * field.value(x) * qj.val.row(0).transpose();
      }
      if (disc.n_block() > 0) {
        basis_jet(disc.face_n_basis(f), x, 0, qj);
        const double dn = field.gradient(x).dot(fr.faces[f].normal);
        out.segment(off + disc.b_block(), disc.n_block()) += q.weights(p) * dn * qj.val.row(0).transpose();
      }
    }
  }
  for (int e = 0; e < mesh.num_ridges() && disc.e_block() > 0; ++e) {
    const int off = num.ridge_offset[e];
    if (off < 0) continue;
    const MappedQuadrature q = carrier_quadrature(ridge_carrier(mesh, fr, e), spec.deg_e + extra_degree);
    for (int p = 0; p < q.size(); ++p) {
      basis_jet(disc.ridge_basis(e), q.points.col(p), 0, qj);
      out.segment(off, disc.e_block()) += q.weights(p) * field.value(q.points.col(p)) * qj.val.row(0).transpose();
    }
  }
  return out;
}

Vec project_QSigma(const Discretization& disc, const std::function<Mat(const Vec&)>& tensor, int extra_degree) {
  const int nc = disc.mesh().num_cells();
  const int ns = disc.stress_local_size();
  Vec out = Vec::Zero(disc.stress_size());
  parallel_for(nc, [&](int c) {
    const TensorPolyBasis& sb = disc.stress_basis(c);
    const MappedQuadrature q = carrier_quadrature(disc.geometry(c).cell, sb.degree + extra_degree);
    BasisJet j;
    Vec acc = Vec::Zero(ns);
    for (int p = 0; p < q.size(); ++p) {
      basis_jet(sb, q.points.col(p), 0, j);
      const Mat t = tensor(q.points.col(p));
      const Eigen::Map<const Vec> flat(t.data(), t.size());
      acc += q.weights(p) * j.val.transpose() * flat;
    }
    out.segment(disc.stress_offset(c), ns) = acc;
  });
  return out;
}

Vec gather_local(const Discretization& disc, int c, const Vec& v, bool interior_only) {
  const std::vector<int> dofs = disc.local_dofs(c, interior_only);
  Vec out = Vec::Zero(static_cast<int>(dofs.size()));
  for (size_t j = 0; j < dofs.size(); ++j)
    if (dofs[j] >= 0) out(j) = v(dofs[j]);
  return out;
}

std::vector<Vec> cr_interpolate(const Discretization& disc, const Vec& v, bool interior_only) {
  std::vector<Vec> out(disc.mesh().num_cells());
  for (int c = 0; c < disc.mesh().num_cells(); ++c) out[c] = disc.cr_map(c) * gather_local(disc, c, v, interior_only);
  return out;
}

// ---------------------------------------------------------------------------

ConformingSpace build_conforming_space(const SimplicialMesh& mesh, const ElementFamily& family) {
  if (family.tag == FamilyTag::NcK2) throw Error(ErrorKind::Unsupported, "NC_K2 has no conforming assembly");
  ConformingSpace sp;
  sp.family = family;
  const EntityFrames fr = compute_frames(mesh);
  const int nc = mesh.num_cells();
  std::vector<DoFSet> dofs(nc);
  sp.geom.resize(nc);
  sp.shape.resize(nc);
  sp.inverse_dof.resize(nc);
  parallel_for(nc, [&](int c) {
    sp.geom[c] = make_cell_geometry(mesh, fr, c);
    sp.shape[c] = shape_basis(family, sp.geom[c].cell);
    dofs[c] = build_dof_set(family, sp.geom[c]);
    sp.inverse_dof[c] = dof_matrix(dofs[c], sp.geom[c], sp.shape[c]).inverse();
  });
  const int nloc = dofs[0].size();

  // Shared face unknowns: normal-normal and effective-shear moments.
  std::vector<int> face_off(mesh.num_faces(), -1);
  std::vector<std::vector<std::pair<int, int>>> ridge_members(mesh.num_ridges());  // (local row, block size)
  int next = 0;
  Triplets local;
  for (int c = 0; c < nc; ++c) {
    int row = c * nloc;
    for (const DofBlock& b : dofs[c].blocks) {
      const bool face_shared = b.kind == DofKind::NormalNormal || b.kind == DofKind::EffectiveShear;
      if (face_shared) {
        const int f = mesh.cell_faces[c][b.entity];
        if (face_off[f] < 0) {
          face_off[f] = next;
          int width = 0;
          for (const DofBlock& bb : dofs[c].blocks)
            if (bb.entity == b.entity &&
                (bb.kind == DofKind::NormalNormal || bb.kind == DofKind::EffectiveShear))
              width += bb.size();
          next += width;
        }
        int shift = 0;
        for (const DofBlock& bb : dofs[c].blocks) {
          if (&bb == &b) break;
          if (bb.entity == b.entity && (bb.kind == DofKind::NormalNormal || bb.kind == DofKind::EffectiveShear))
            shift += bb.size();
        }
        const double sign = b.kind == DofKind::EffectiveShear ? fr.cells[c].face_signs[b.entity] : 1.0;
        for (int j = 0; j < b.size(); ++j) local.emplace_back(row + j, face_off[f] + shift + j, sign);
      } else {
        if (b.kind == DofKind::RidgeTrace) ridge_members[mesh.cell_ridges[c][b.entity]].push_back({next, b.size()});
        for (int j = 0; j < b.size(); ++j) local.emplace_back(row + j, next + j, 1.0);
        next += b.size();
      }
      row += b.size();
    }
  }
  sp.global_dofs = next;
  sp.to_local = from_triplets(nc * nloc, next, local);

  Triplets cons;
  int rows = 0;
  for (int e = 0; e < mesh.num_ridges(); ++e) {
    if (mesh.ridge_boundary[e] || ridge_members[e].empty()) continue;
    const int width = ridge_members[e][0].second;
    for (int j = 0; j < width; ++j) {
      for (const auto& [start, w] : ridge_members[e]) cons.emplace_back(rows, start + j, 1.0);
      ++rows;
    }
  }
  sp.constraints = rows;
  sp.constraint = from_triplets(rows, next, cons);
  if (rows > 0) {
    SparseMat ct = sp.constraint.transpose();
    ct.makeCompressed();
    Eigen::SparseQR<SparseMat, Eigen::COLAMDOrdering<int>> qr;
    qr.setPivotThreshold(1e-9);
    qr.compute(ct);
    sp.constraint_rank = static_cast<int>(qr.rank());
  }
  sp.dimension = sp.global_dofs - sp.constraint_rank;
  return sp;
}

Vec conforming_coefficients(const ConformingSpace& space, const Vec& global) {
  const Vec local = space.to_local * global;
  const int nc = static_cast<int>(space.inverse_dof.size());
  const int nloc = static_cast<int>(space.inverse_dof[0].rows());
  Vec out(nc * nloc);
  for (int c = 0; c < nc; ++c) out.segment(c * nloc, nloc) = space.inverse_dof[c] * local.segment(c * nloc, nloc);
  return out;
}

void write_coo(const SparseMat& a, std::ostream& out) {
  out.precision(17);
  for (int k = 0; k < a.outerSize(); ++k)
    for (SparseMat::InnerIterator it(a, k); it; ++it) out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

}  // namespace divdiv
