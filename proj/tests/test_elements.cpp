#include <gtest/gtest.h>

#include <random>

#include "divdiv/elements.hpp"
#include "divdiv/verification.hpp"
#include "test_util.hpp"

using namespace divdiv;
using namespace divdiv::testing;

namespace {

struct Case {
  FamilyTag tag;
  int k;
};

const std::vector<Case> kFamilies = {{FamilyTag::New, 3},    {FamilyTag::New, 4},
                                     {FamilyTag::RtPlus, 2}, {FamilyTag::RtPlus, 3},
                                     {FamilyTag::OnePlusPlus, 1}, {FamilyTag::NcK2, 2}};

TensorPolyBasis scalar_poly(const Carrier& c, int degree) { return make_basis(SpaceId::PScalar, c, degree); }

/// Green residual for stress coefficients a and scalar coefficients b,
/// relative to the largest individual term.
double green_identity_defect(const CellGeometry& g, const TensorPolyBasis& stress, const Vec& a, const TensorPolyBasis& v,
                      const Vec& b) {
  const int d = g.dim;
  const TensorPolyBasis sig = combine(stress, a);
  const TensorPolyBasis w = combine(v, b);
  const TensorPolyBasis dd = differentiate(sig, DiffOp::DivDiv);
  const TensorPolyBasis hw = differentiate(w, DiffOp::Hessian);
  double terms[4] = {0, 0, 0, 0};
  BasisJet js, jw, jd, jh;
  const int deg = stress.degree + v.degree;
  MappedQuadrature q = carrier_quadrature(g.cell, deg);
  for (int p = 0; p < q.size(); ++p) {
    const Vec x = q.points.col(p);
    basis_jet(dd, x, 0, jd);
    basis_jet(w, x, 0, jw);
    basis_jet(sig, x, 0, js);
    basis_jet(hw, x, 0, jh);
    terms[0] += q.weights(p) * jd.val(0, 0) * jw.val(0, 0);
    terms[1] -= q.weights(p) * js.val.col(0).dot(jh.val.col(0));
  }
  for (int i = 0; i <= d; ++i) {
    q = carrier_quadrature(g.faces[i], deg);
    for (int p = 0; p < q.size(); ++p) {
      const Vec x = q.points.col(p);
      basis_jet(sig, x, 1, js);
      basis_jet(w, x, 1, jw);
      double dn = 0.0;
      for (int a2 = 0; a2 < d; ++a2) dn += g.normals[i](a2) * jw.d1[a2](0, 0);
      terms[2] += q.weights(p) * (normal_normal(js, g.normals[i])(0) * dn -
                                  effective_shear(js, g.normals[i], g.faces[i].chart.axes)(0) * jw.val(0, 0));
    }
  }
  for (size_t pr = 0; pr < g.ridges.size(); ++pr) {
    q = carrier_quadrature(g.ridges[pr], deg);
    for (int p = 0; p < q.size(); ++p) {
      basis_jet(sig, q.points.col(p), 0, js);
      basis_jet(w, q.points.col(p), 0, jw);
      terms[3] += q.weights(p) * ridge_trace(js, g, static_cast<int>(pr))(0) * jw.val(0, 0);
    }
  }
  double scale = 0.0;
  for (double t : terms) scale = std::max(scale, std::abs(t));
  return std::abs(terms[0] + terms[1] + terms[2] + terms[3]) / scale;
}

}  // namespace

TEST(DofSets, CountsNew3In3D) {
  const CellGeometry g = make_cell_geometry(reference_simplex(3));
  const DoFSet s = build_dof_set(make_family(FamilyTag::New, 3), g);
  EXPECT_EQ(s.size(), 120);
  EXPECT_EQ(s.count(DofKind::RidgeTrace), 24);
  EXPECT_EQ(s.count(DofKind::NormalNormal), 40);
  EXPECT_EQ(s.count(DofKind::EffectiveShear), 24);
  EXPECT_EQ(s.count(DofKind::TangentialNormal), 32);
  EXPECT_EQ(s.count(DofKind::InteriorDef), 0);
  EXPECT_EQ(s.count(DofKind::InteriorKernel), 0);
}

TEST(DofSets, CountsMatchShapeDimension) {
  const std::map<std::pair<int, int>, int> expected = {
      {{2, 0}, 30}, {{2, 1}, 45}, {{2, 2}, 20}, {{2, 3}, 33}, {{2, 4}, 15}, {{2, 5}, 18},
      {{3, 0}, 120}, {{3, 1}, 210}, {{3, 2}, 63}, {{3, 3}, 126}, {{3, 4}, 36}, {{3, 5}, 60}};
  for (int dim : {2, 3}) {
    const CellGeometry g = make_cell_geometry(reference_simplex(dim));
    for (size_t i = 0; i < kFamilies.size(); ++i) {
      const ElementFamily fam = make_family(kFamilies[i].tag, kFamilies[i].k);
      const DoFSet s = build_dof_set(fam, g);
      EXPECT_EQ(s.size(), shape_basis(fam, g.cell).size()) << family_name(fam) << " d=" << dim;
      EXPECT_EQ(s.size(), expected.at({dim, static_cast<int>(i)})) << family_name(fam) << " d=" << dim;
    }
  }
}

TEST(DofSets, OnePlusPlusBreakdown) {
  const DoFSet s = build_dof_set(make_family(FamilyTag::OnePlusPlus, 1), make_cell_geometry(reference_simplex(3)));
  EXPECT_EQ(s.count(DofKind::RidgeTrace), 12);
  EXPECT_EQ(s.count(DofKind::NormalNormal), 12);
  EXPECT_EQ(s.count(DofKind::EffectiveShear), 12);
}

TEST(DofSets, InvalidFamiliesRejected) {
  for (const Case& c : std::vector<Case>{{FamilyTag::New, 2}, {FamilyTag::RtPlus, 1}, {FamilyTag::OnePlusPlus, 2},
                                         {FamilyTag::NcK2, 3}}) {
    try {
      make_family(c.tag, c.k);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Unsupported);
    }
  }
}

TEST(DofMatrix, UnisolventOnReferenceAndRandomCells) {
  std::mt19937 rng(21);
  for (int dim : {2, 3}) {
    std::vector<Mat> cells = {reference_simplex(dim)};
    for (int t = 0; t < 3; ++t) cells.push_back(random_simplex(rng, dim));
    for (const Case& c : kFamilies) {
      const ElementFamily fam = make_family(c.tag, c.k);
      for (const Mat& v : cells) {
        const CellGeometry g = make_cell_geometry(v);
        const Mat D = dof_matrix(build_dof_set(fam, g), g, orthonormalize(shape_basis(fam, g.cell)));
        EXPECT_GT(normalized_min_singular_value(D), 1e-8) << family_name(fam) << " d=" << dim;
      }
    }
  }
}

TEST(Traces, IdentityTensor) {
  std::mt19937 rng(2);
  for (int dim : {2, 3}) {
    const CellGeometry g = make_cell_geometry(random_simplex(rng, dim));
    TensorField id;
    id.value = [dim](const Vec&) { return Mat(Mat::Identity(dim, dim)); };
    id.gradient = [dim](const Vec&) { return std::vector<Mat>(dim, Mat::Zero(dim, dim)); };
    const TensorSampler s = field_sampler(id);
    BasisJet j;
    for (int i = 0; i <= dim; ++i) {
      s(g.faces[i].centroid(), 1, j);
      EXPECT_NEAR(normal_normal(j, g.normals[i])(0), 1.0, 1e-14);
      EXPECT_NEAR(effective_shear(j, g.normals[i], g.faces[i].chart.axes)(0), 0.0, 1e-14);
    }
    for (size_t p = 0; p < g.ridges.size(); ++p) {
      s(g.ridges[p].centroid(), 0, j);
      EXPECT_NEAR(ridge_trace(j, g, static_cast<int>(p))(0), 0.0, 1e-14);
    }
  }
}

TEST(Traces, RankOneNormalTensor) {
  const CellGeometry g = make_cell_geometry(reference_simplex(3));
  const Vec n0 = g.normals[0];
  TensorField f;
  f.value = [n0](const Vec&) { return Mat(n0 * n0.transpose()); };
  BasisJet j;
  field_sampler(f)(g.faces[0].centroid(), 0, j);
  for (int i = 0; i <= 3; ++i) {
    const double c = n0.dot(g.normals[i]);
    EXPECT_NEAR(normal_normal(j, g.normals[i])(0), c * c, 1e-14);
  }
}

TEST(Traces, ConormalsPointAcrossRidge) {
  std::mt19937 rng(4);
  for (int dim : {2, 3}) {
    const Mat v = random_simplex(rng, dim);
    const CellGeometry g = make_cell_geometry(v);
    for (size_t p = 0; p < g.ridges.size(); ++p) {
      const auto [i, j] = local_pairs(dim)[p];
      const Vec rc = g.ridges[p].centroid();
      // Within F_i the ridge is opposite v_j.
      EXPECT_LT(g.ridge_conormals[p][0].dot(v.col(j) - rc), 0.0);
      EXPECT_LT(g.ridge_conormals[p][1].dot(v.col(i) - rc), 0.0);
      EXPECT_NEAR(g.ridge_conormals[p][0].dot(g.normals[i]), 0.0, 1e-13);
      EXPECT_NEAR(g.ridge_conormals[p][1].dot(g.normals[j]), 0.0, 1e-13);
    }
  }
}

TEST(Traces, GreenIdentityRandomPairs) {
  std::mt19937 rng(8);
  for (int dim : {2, 3}) {
    for (const Case& c : kFamilies) {
      const ElementFamily fam = make_family(c.tag, c.k);
      for (int trial = 0; trial < 5; ++trial) {
        const CellGeometry g = make_cell_geometry(random_simplex(rng, dim));
        const TensorPolyBasis shape = shape_basis(fam, g.cell);
        const TensorPolyBasis v = scalar_poly(g.cell, shape.degree + 2);
        EXPECT_LT(green_identity_defect(g, shape, random_vector(rng, shape.size()), v, random_vector(rng, v.size())), 1e-10)
            << family_name(fam) << " d=" << dim;
      }
    }
  }
}

TEST(Interpolation, ReproducesShapeFunctions) {
  std::mt19937 rng(12);
  for (int dim : {2, 3}) {
    const CellGeometry g = make_cell_geometry(random_simplex(rng, dim));
    const ElementFamily fam = make_family(FamilyTag::New, 3);
    const TensorPolyBasis shape = shape_basis(fam, g.cell);
    const Vec coeff = random_vector(rng, shape.size());
    const TensorPolyBasis member = combine(shape, coeff);
    TensorField f;
    BasisJet j;
    f.value = [&](const Vec& x) {
      basis_jet(member, x, 0, j);
      return Mat(Eigen::Map<const Mat>(j.val.data(), dim, dim));
    };
    f.gradient = [&](const Vec& x) {
      basis_jet(member, x, 1, j);
      std::vector<Mat> out;
      for (int a = 0; a < dim; ++a) out.push_back(Eigen::Map<const Mat>(j.d1[a].data(), dim, dim));
      return out;
    };
    const Vec got = canonical_interpolate(fam, g, shape, f);
    EXPECT_LT((got - coeff).norm(), 1e-10 * coeff.norm());
  }
}

TEST(Interpolation, IdentityAndMissingDerivative) {
  const CellGeometry g = make_cell_geometry(reference_simplex(2));
  const ElementFamily fam = make_family(FamilyTag::New, 3);
  const TensorPolyBasis shape = shape_basis(fam, g.cell);
  TensorField f;
  f.value = [](const Vec&) { return Mat(Mat::Identity(2, 2)); };
  try {
    canonical_interpolate(fam, g, shape, f);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingDerivative);
  }
  f.gradient = [](const Vec&) { return std::vector<Mat>(2, Mat::Zero(2, 2)); };
  const Vec c = canonical_interpolate(fam, g, shape, f);
  BasisJet j;
  basis_jet(combine(shape, c), Vec::Constant(2, 0.3), 0, j);
  EXPECT_LT((j.val.col(0) - Vec((Vec(4) << 1, 0, 0, 1).finished())).norm(), 1e-10);
}

TEST(Interpolation, FortinCommutesWithDivDiv) {
  std::mt19937 rng(13);
  for (int dim : {2, 3}) {
    const TrigonometricTensor trig(dim);
    const TensorField f = trig.field();
    for (const Case& c : kFamilies) {
      if (c.tag == FamilyTag::NcK2) continue;
      const ElementFamily fam = make_family(c.tag, c.k);
      const CellGeometry g = make_cell_geometry(random_simplex(rng, dim) * 0.5);
      const TensorPolyBasis shape = shape_basis(fam, g.cell);
      const Vec coeff = canonical_interpolate(fam, g, shape, f);
      const TensorPolyBasis dd = differentiate(combine(shape, coeff), DiffOp::DivDiv);
      const TensorPolyBasis pr = orthonormalize(make_basis(SpaceId::PScalar, g.cell, fam.r));
      const MappedQuadrature q = carrier_quadrature(g.cell, 30);
      Vec moments = Vec::Zero(pr.size()), interp = Vec::Zero(pr.size());
      BasisJet jp, jd;
      for (int p = 0; p < q.size(); ++p) {
        basis_jet(pr, q.points.col(p), 0, jp);
        basis_jet(dd, q.points.col(p), 0, jd);
        moments += q.weights(p) * trig.divdiv(q.points.col(p)) * jp.val.row(0).transpose();
        interp += q.weights(p) * jd.val(0, 0) * jp.val.row(0).transpose();
      }
      EXPECT_LT((moments - interp).norm(), 1e-8 * moments.norm()) << family_name(fam) << " d=" << dim;
      // divdiv of the interpolant has degree at most r, so matching moments means equality.
      const int low = num_monomials(dim, fam.r);
      const Mat& cdd = dd.coeffs[0];
      EXPECT_LT(cdd.bottomRows(cdd.rows() - low).norm(), 1e-10 * (1 + cdd.norm()));
    }
  }
}

TEST(Traces, OnePlusPlusTracesAreLinear) {
  std::mt19937 rng(14);
  for (int dim : {2, 3}) {
    const CellGeometry g = make_cell_geometry(random_simplex(rng, dim));
    const TensorPolyBasis shape = make_basis(SpaceId::SigmaOnePP, g.cell, 1);
    BasisJet j, jq;
    auto check = [&](const Carrier& car, auto trace) {
      const TensorPolyBasis p1 = orthonormalize(make_basis(SpaceId::PScalar, car, 1));
      const MappedQuadrature q = carrier_quadrature(car, 10);
      Mat values(q.size(), shape.size()), basis(q.size(), p1.size());
      for (int p = 0; p < q.size(); ++p) {
        basis_jet(shape, q.points.col(p), 1, j);
        basis_jet(p1, q.points.col(p), 0, jq);
        values.row(p) = trace(j);
        basis.row(p) = jq.val.row(0);
      }
      const Vec w = q.weights;
      const Mat proj = basis * (basis.transpose() * w.asDiagonal() * values);
      const Mat res = values - proj;
      EXPECT_LT(std::sqrt((res.transpose() * w.asDiagonal() * res).trace()),
                1e-10 * std::max(1.0, std::sqrt((values.transpose() * w.asDiagonal() * values).trace())));
    };
    for (int i = 0; i <= dim; ++i) {
      check(g.faces[i], [&](const BasisJet& jj) { return Eigen::RowVectorXd(normal_normal(jj, g.normals[i])); });
      check(g.faces[i], [&](const BasisJet& jj) {
        return Eigen::RowVectorXd(effective_shear(jj, g.normals[i], g.faces[i].chart.axes));
      });
    }
    for (size_t p = 0; p < g.ridges.size(); ++p)
      check(g.ridges[p], [&](const BasisJet& jj) { return Eigen::RowVectorXd(ridge_trace(jj, g, static_cast<int>(p))); });
  }
}

TEST(DofSets, LowOrderTraceFunctionalsDependent) {
  // Trace moments of the NEW table at k = 2 on P_2(S): more rows than the
  // rank they span.
  for (int dim : {2, 3}) {
    const CellGeometry g = make_cell_geometry(reference_simplex(dim));
    DoFSet s;
    s.family = ElementFamily{FamilyTag::New, 2, 0};
    for (size_t p = 0; p < g.ridges.size(); ++p)
      s.blocks.push_back({DofKind::RidgeTrace, static_cast<int>(p), -1, make_basis(SpaceId::PScalar, g.ridges[p], 2)});
    for (int i = 0; i <= dim; ++i) {
      s.blocks.push_back({DofKind::NormalNormal, i, -1, make_basis(SpaceId::PScalar, g.faces[i], 2)});
      s.blocks.push_back({DofKind::EffectiveShear, i, -1, make_basis(SpaceId::PScalar, g.faces[i], 1)});
    }
    const Mat D = dof_matrix(s, g, make_basis(SpaceId::PSym, g.cell, 2));
    EXPECT_LT(numerical_rank(D), D.rows()) << "d=" << dim;
  }
}
