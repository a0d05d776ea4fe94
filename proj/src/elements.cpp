#include "divdiv/elements.hpp"

#include <cmath>

namespace divdiv {

using Row = Eigen::RowVectorXd;

TensorPolyBasis shape_basis(ShapeKind kind, int k, const Carrier& cell) {
  switch (kind) {
    case ShapeKind::Pk: return make_basis(SpaceId::PSym, cell, k);
    case ShapeKind::PkPlus:
      if (k == 0) return make_basis(SpaceId::PSym, cell, 0);
      return make_basis(SpaceId::SigmaPlus, cell, k);
    case ShapeKind::OnePlusPlus: return make_basis(SpaceId::SigmaOnePP, cell, 1);
  }
  throw Error(ErrorKind::UnsupportedSpace, "shape kind");
}

ElementFamily make_family(FamilyTag tag, int k) {
  ElementFamily f;
  f.tag = tag;
  f.k = k;
  switch (tag) {
    case FamilyTag::New:
      if (k < 3 || k > 6) throw Error(ErrorKind::Unsupported, "NEW family needs 3 <= k <= 6");
      f.r = k - 2;
      break;
    case FamilyTag::RtPlus:
      if (k < 2 || k > 6) throw Error(ErrorKind::Unsupported, "RTPLUS family needs 2 <= k <= 6");
      f.r = k - 1;
      break;
    case FamilyTag::OnePlusPlus:
      if (k != 1) throw Error(ErrorKind::Unsupported, "ONEPP family is defined for k = 1 only");
      f.r = 1;
      break;
    case FamilyTag::NcK2:
      if (k != 2) throw Error(ErrorKind::Unsupported, "NC_K2 table is defined for k = 2 only");
      f.r = 0;
      break;
  }
  return f;
}

std::string family_name(const ElementFamily& family) {
  switch (family.tag) {
    case FamilyTag::New: return "NEW_" + std::to_string(family.k);
    case FamilyTag::RtPlus: return "RTPLUS_" + std::to_string(family.k);
    case FamilyTag::OnePlusPlus: return "ONEPP";
    case FamilyTag::NcK2: return "NC_K2";
  }
  return "?";
}

ShapeKind shape_kind(const ElementFamily& family) {
  switch (family.tag) {
    case FamilyTag::New:
    case FamilyTag::NcK2: return ShapeKind::Pk;
    case FamilyTag::RtPlus: return ShapeKind::PkPlus;
    case FamilyTag::OnePlusPlus: return ShapeKind::OnePlusPlus;
  }
  return ShapeKind::Pk;
}

TensorPolyBasis shape_basis(const ElementFamily& family, const Carrier& cell) {
  return shape_basis(shape_kind(family), family.k, cell);
}

// ---------------------------------------------------------------------------

Row normal_normal(const BasisJet& jet, const Vec& n) {
  const int d = static_cast<int>(n.size());
  Row out = Row::Zero(jet.val.cols());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out += n(i) * n(j) * jet.val.row(i * d + j);
  return out;
}

Row effective_shear(const BasisJet& jet, const Vec& n, const Mat& tangents) {
  const int d = static_cast<int>(n.size());
  Row out = Row::Zero(jet.val.cols());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out += n(i) * jet.d1[j].row(i * d + j);
  for (int t = 0; t < tangents.cols(); ++t)
    for (int a = 0; a < d; ++a) {
      const double ta = tangents(a, t);
      if (ta == 0.0) continue;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) out += ta * tangents(i, t) * n(j) * jet.d1[a].row(i * d + j);
    }
  return out;
}

Row conormal_normal(const BasisJet& jet, const Vec& conormal, const Vec& n) {
  const int d = static_cast<int>(n.size());
  Row out = Row::Zero(jet.val.cols());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out += conormal(i) * n(j) * jet.val.row(i * d + j);
  return out;
}

Mat tensor_normal(const BasisJet& jet, const Vec& n) {
  const int d = static_cast<int>(n.size());
  Mat out = Mat::Zero(d, jet.val.cols());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out.row(i) += n(j) * jet.val.row(i * d + j);
  return out;
}

Row divdiv_value(const BasisJet& jet) {
  const int d = static_cast<int>(jet.d1.size());
  Row out = Row::Zero(jet.val.cols());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out += jet.d2[i * d + j].row(i * d + j);
  return out;
}

Row contract(const BasisJet& jet, const Mat& w) {
  const int d = static_cast<int>(w.rows());
  Row out = Row::Zero(jet.val.cols());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (w(i, j) != 0.0) out += w(i, j) * jet.val.row(i * d + j);
  return out;
}

Row ridge_trace(const BasisJet& jet, const CellGeometry& geom, int p) {
  const auto [i, j] = local_pairs(geom.dim)[p];
  return conormal_normal(jet, geom.ridge_conormals[p][0], geom.normals[i]) +
         conormal_normal(jet, geom.ridge_conormals[p][1], geom.normals[j]);
}

TraceTables compute_traces(const TensorPolyBasis& basis, const CellGeometry& geom, int face_degree) {
  TraceTables t;
  const int d = geom.dim;
  BasisJet jet;
  for (int i = 0; i <= d; ++i) {
    const MappedQuadrature q = carrier_quadrature(geom.faces[i], face_degree);
    Mat tr1(q.size(), basis.size()), tr2(q.size(), basis.size());
    std::vector<Mat> tn;
    for (int p = 0; p < q.size(); ++p) {
      basis_jet(basis, q.points.col(p), 1, jet);
      tr1.row(p) = normal_normal(jet, geom.normals[i]);
      tr2.row(p) = effective_shear(jet, geom.normals[i], geom.faces[i].chart.axes);
      const Mat taun = tensor_normal(jet, geom.normals[i]);
      const Mat proj = Mat::Identity(d, d) - geom.normals[i] * geom.normals[i].transpose();
      tn.push_back(proj * taun);
    }
    t.face_quadrature.push_back(q);
    t.tr1.push_back(tr1);
    t.tr2.push_back(tr2);
    t.tangential_normal.push_back(tn);
  }
  for (size_t p = 0; p < geom.ridges.size(); ++p) {
    const MappedQuadrature q = carrier_quadrature(geom.ridges[p], face_degree);
    Mat tre(q.size(), basis.size());
    for (int s = 0; s < q.size(); ++s) {
      basis_jet(basis, q.points.col(s), 0, jet);
      tre.row(s) = ridge_trace(jet, geom, static_cast<int>(p));
    }
    t.ridge_quadrature.push_back(q);
    t.tre.push_back(tre);
  }
  return t;
}

// ---------------------------------------------------------------------------

const char* to_string(DofKind kind) {
  switch (kind) {
    case DofKind::RidgeTrace: return "ridge-trace";
    case DofKind::NormalNormal: return "normal-normal";
    case DofKind::EffectiveShear: return "effective-shear";
    case DofKind::TangentialNormal: return "tangential-normal";
    case DofKind::InteriorDef: return "interior-def";
    case DofKind::InteriorKernel: return "interior-kernel";
    case DofKind::Bubble: return "bubble";
    case DofKind::DivDiv: return "divdiv";
  }
  return "?";
}

int DoFSet::size() const {
  int n = 0;
  for (const auto& b : blocks) n += b.size();
  return n;
}

int DoFSet::count(DofKind kind) const {
  int n = 0;
  for (const auto& b : blocks)
    if (b.kind == kind) n += b.size();
  return n;
}

namespace {

// L^2 complement of span(sub) inside span(space); both on the same carrier.
TensorPolyBasis l2_complement(const TensorPolyBasis& space, const TensorPolyBasis& sub) {
  const TensorPolyBasis on = orthonormalize(space);
  const Mat overlap = gram_matrix(on, sub);  // coordinates of sub in the orthonormal basis
  return combine(on, nullspace(overlap.transpose()));
}

void add_block(DoFSet& set, DofKind kind, int entity, TensorPolyBasis tests, int aux = -1) {
  if (tests.size() == 0) return;
  set.blocks.push_back({kind, entity, aux, orthonormalize(tests)});
}

void add_trace_blocks(DoFSet& set, const CellGeometry& g, int ridge_degree, int nn_degree,
                      const TensorPolyBasis* shear_tests_per_face, int shear_degree) {
  const int d = g.dim;
  for (size_t p = 0; p < g.ridges.size(); ++p)
    add_block(set, DofKind::RidgeTrace, static_cast<int>(p), make_basis(SpaceId::PScalar, g.ridges[p], ridge_degree));
  for (int i = 0; i <= d; ++i)
    add_block(set, DofKind::NormalNormal, i, make_basis(SpaceId::PScalar, g.faces[i], nn_degree));
  for (int i = 0; i <= d; ++i)
    add_block(set, DofKind::EffectiveShear, i,
              shear_tests_per_face ? shear_tests_per_face[i] : make_basis(SpaceId::PScalar, g.faces[i], shear_degree));
}

void add_bubble_blocks(DoFSet& set, const CellGeometry& g) {
  const int d = g.dim;
  for (int r = d; r >= 3; --r) {
    // f = conv(v_0 .. v_{r-2}) lies in F_r, the face opposite v_r.
    const Mat fv = g.cell.vertices.leftCols(r - 1);
    const Carrier f = make_carrier(fv, ChartOrigin::FirstVertex);
    add_block(set, DofKind::Bubble, -1, make_basis(SpaceId::RTBubble, f, 2), r);
  }
}

}  // namespace

DoFSet build_dof_set(const ElementFamily& family, const CellGeometry& g) {
  DoFSet set;
  set.family = family;
  const int d = g.dim;
  const int k = family.k;
  switch (family.tag) {
    case FamilyTag::New:
    case FamilyTag::RtPlus: {
      if (family.tag == FamilyTag::RtPlus && k == 2) {
        add_trace_blocks(set, g, 2, 2, nullptr, 1);
        add_bubble_blocks(set, g);
        add_block(set, DofKind::InteriorKernel, -1, make_basis(SpaceId::KerXXP1, g.cell, 1));
        break;
      }
      add_trace_blocks(set, g, k, k, nullptr, k - 1);
      for (int i = 0; i <= d; ++i)
        add_block(set, DofKind::TangentialNormal, i, make_basis(SpaceId::ND, g.faces[i], k - 2));
      const TensorPolyBasis rm = make_basis(SpaceId::RM, g.cell, 0);
      const TensorPolyBasis vec_space = family.tag == FamilyTag::New
                                            ? make_basis(SpaceId::ND, g.cell, k - 3)
                                            : make_basis(SpaceId::PVector, g.cell, k - 2);
      const TensorPolyBasis complement = l2_complement(vec_space, rm);
      if (complement.size() > 0) add_block(set, DofKind::InteriorDef, -1, differentiate(complement, DiffOp::SymGrad));
      if (k - 2 >= 0) add_block(set, DofKind::InteriorKernel, -1, make_basis(SpaceId::KerDotX, g.cell, k - 2));
      break;
    }
    case FamilyTag::OnePlusPlus:
      add_trace_blocks(set, g, 1, 1, nullptr, 1);
      break;
    case FamilyTag::NcK2: {
      std::vector<TensorPolyBasis> shear;
      for (int i = 0; i <= d; ++i)
        shear.push_back(l2_complement(make_basis(SpaceId::PScalar, g.faces[i], 1),
                                      make_basis(SpaceId::PScalar, g.faces[i], 0)));
      add_trace_blocks(set, g, 2, 2, shear.data(), 1);
      add_bubble_blocks(set, g);
      add_block(set, DofKind::InteriorKernel, -1, make_basis(SpaceId::KerXXP1, g.cell, 1));
      add_block(set, DofKind::DivDiv, -1, make_basis(SpaceId::PScalar, g.cell, 0));
      break;
    }
  }
  return set;
}

Mat apply_dofs(const DoFSet& dofs, const CellGeometry& g, const TensorSampler& sampler, int columns,
               int sample_degree) {
  Mat out = Mat::Zero(dofs.size(), columns);
  BasisJet jet, test;
  int row = 0;
  for (const auto& b : dofs.blocks) {
    const int qdeg = std::min(kMaxQuadratureDegree, b.tests.degree + sample_degree);
    const int order = b.kind == DofKind::EffectiveShear ? 1 : (b.kind == DofKind::DivDiv ? 2 : 0);
    auto block = out.middleRows(row, b.size());
    const Carrier* carrier = &g.cell;
    if (b.kind == DofKind::RidgeTrace) carrier = &g.ridges[b.entity];
    if (b.kind == DofKind::NormalNormal || b.kind == DofKind::EffectiveShear || b.kind == DofKind::TangentialNormal)
      carrier = &g.faces[b.entity];
    if (b.kind == DofKind::Bubble) carrier = &b.tests.carrier;
    const MappedQuadrature q = carrier_quadrature(*carrier, qdeg);
    for (int p = 0; p < q.size(); ++p) {
      const Vec x = q.points.col(p);
      sampler(x, order, jet);
      basis_jet(b.tests, x, 0, test);
      Mat contribution;
      switch (b.kind) {
        case DofKind::RidgeTrace:
          contribution = test.val.transpose() * ridge_trace(jet, g, b.entity);
          break;
        case DofKind::NormalNormal:
          contribution = test.val.transpose() * normal_normal(jet, g.normals[b.entity]);
          break;
        case DofKind::EffectiveShear:
          contribution = test.val.transpose() *
                         effective_shear(jet, g.normals[b.entity], g.faces[b.entity].chart.axes);
          break;
        case DofKind::TangentialNormal:
          contribution = test.val.transpose() * tensor_normal(jet, g.normals[b.entity]);
          break;
        case DofKind::Bubble:
          contribution = test.val.transpose() * tensor_normal(jet, g.normals[b.aux]);
          break;
        case DofKind::InteriorDef:
        case DofKind::InteriorKernel: {
          contribution = Mat::Zero(b.size(), columns);
          const int d = g.dim;
          for (int c = 0; c < d * d; ++c) contribution += test.val.row(c).transpose() * jet.val.row(c);
          break;
        }
        case DofKind::DivDiv:
          contribution = test.val.transpose() * divdiv_value(jet);
          break;
      }
      block += q.weights(p) * contribution;
    }
    row += b.size();
  }
  return out;
}

TensorSampler basis_sampler(const TensorPolyBasis& basis) {
  return [&basis](const Vec& x, int order, BasisJet& out) { basis_jet(basis, x, order, out); };
}

TensorSampler field_sampler(const TensorField& field) {
  return [&field](const Vec& x, int order, BasisJet& out) {
    const Mat v = field.value(x);
    const int d = static_cast<int>(v.rows());
    out.val = Eigen::Map<const Vec>(v.data(), d * d);  // symmetric: storage order irrelevant
    if (order >= 1) {
      if (!field.gradient) throw Error(ErrorKind::MissingDerivative, "effective shear needs the field Jacobian");
      const auto g = field.gradient(x);
      out.d1.resize(d);
      for (int a = 0; a < d; ++a) out.d1[a] = Eigen::Map<const Vec>(g[a].data(), d * d);
    }
    if (order >= 2) throw Error(ErrorKind::MissingDerivative, "div-div moments need second derivatives");
  };
}

Mat dof_matrix(const DoFSet& dofs, const CellGeometry& geom, const TensorPolyBasis& shape) {
  return apply_dofs(dofs, geom, basis_sampler(shape), shape.size(), shape.degree);
}

double normalized_min_singular_value(const Mat& m) {
  Mat a = m;
  for (int i = 0; i < a.rows(); ++i) {
    const double n = a.row(i).norm();
    if (n > 0) a.row(i) /= n;
  }
  for (int j = 0; j < a.cols(); ++j) {
    const double n = a.col(j).norm();
    if (n > 0) a.col(j) /= n;
  }
  Eigen::BDCSVD<Mat> svd(a);
  const auto& s = svd.singularValues();
  if (a.rows() != a.cols()) return 0.0;
  return s(s.size() - 1);
}

Vec canonical_interpolate(const ElementFamily& family, const CellGeometry& geom, const TensorPolyBasis& shape,
                          const TensorField& field, int quadrature_degree) {
  const DoFSet dofs = build_dof_set(family, geom);
  const Mat D = dof_matrix(dofs, geom, shape);
  const int field_degree = quadrature_degree > 0 ? quadrature_degree : 2 * family.k + 12;
  const Mat values = apply_dofs(dofs, geom, field_sampler(field), 1, field_degree);
  return D.partialPivLu().solve(values.col(0));
}

}  // namespace divdiv
