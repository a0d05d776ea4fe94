#include "divdiv/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>

namespace divdiv {

namespace {

std::vector<int> without(const std::vector<int>& tuple, int skip_a, int skip_b = -1) {
  std::vector<int> out;
  out.reserve(tuple.size());
  for (int i = 0; i < static_cast<int>(tuple.size()); ++i)
    if (i != skip_a && i != skip_b) out.push_back(tuple[i]);
  return out;
}

Mat gather(const Mat& coords, const std::vector<int>& ids) {
  Mat out(coords.rows(), static_cast<Eigen::Index>(ids.size()));
  for (size_t i = 0; i < ids.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = coords.col(ids[i]);
  return out;
}

Mat drop_columns(const Mat& m, int skip_a, int skip_b = -1) {
  const int keep = static_cast<int>(m.cols()) - 1 - (skip_b >= 0 ? 1 : 0);
  Mat out(m.rows(), keep);
  int c = 0;
  for (int i = 0; i < m.cols(); ++i)
    if (i != skip_a && i != skip_b) out.col(c++) = m.col(i);
  return out;
}

}  // namespace

Mat SimplicialMesh::cell_vertices(int c) const { return gather(coords, cells.at(c)); }
Mat SimplicialMesh::face_vertices(int f) const { return gather(coords, faces.at(f)); }
Mat SimplicialMesh::ridge_vertices(int e) const { return gather(coords, ridges.at(e)); }

int SimplicialMesh::num_interior_faces() const {
  return static_cast<int>(std::count(face_boundary.begin(), face_boundary.end(), false));
}

int SimplicialMesh::num_interior_ridges() const {
  return static_cast<int>(std::count(ridge_boundary.begin(), ridge_boundary.end(), false));
}

const std::vector<std::pair<int, int>>& local_pairs(int dim) {
  static const std::vector<std::pair<int, int>> pairs2 = {{0, 1}, {0, 2}, {1, 2}};
  static const std::vector<std::pair<int, int>> pairs3 = {{0, 1}, {0, 2}, {0, 3},
                                                          {1, 2}, {1, 3}, {2, 3}};
  if (dim == 2) return pairs2;
  if (dim == 3) return pairs3;
  throw Error(ErrorKind::UnsupportedDimension, "dimension " + std::to_string(dim));
}

SimplicialMesh build_mesh(int dim, const Mat& coords, std::vector<std::vector<int>> cells) {
  if (dim != 2 && dim != 3) throw Error(ErrorKind::UnsupportedDimension, "dimension " + std::to_string(dim));
  SimplicialMesh m;
  m.dim = dim;
  m.coords = coords;
  const auto& pairs = local_pairs(dim);
  std::map<std::vector<int>, int> face_id, ridge_id;
  m.cell_parity.resize(cells.size());
  for (size_t c = 0; c < cells.size(); ++c) {
    auto& cell = cells[c];
    std::sort(cell.begin(), cell.end());
    const Mat v = gather(coords, cell);
    Mat edges(dim, dim);
    for (int i = 0; i < dim; ++i) edges.col(i) = v.col(i + 1) - v.col(0);
    const double det = edges.determinant();
    const double h = simplex_diameter(v);
    if (std::abs(det) <= 1e-14 * std::pow(h, dim))
      throw Error(ErrorKind::DegenerateCell, "cell " + std::to_string(c) + " has zero volume");
    m.cell_parity[c] = det < 0;
  }
  m.cells = cells;
  m.cell_faces.resize(cells.size());
  m.cell_ridges.resize(cells.size());
  for (size_t c = 0; c < cells.size(); ++c) {
    const auto& cell = cells[c];
    for (int i = 0; i <= dim; ++i) {
      auto face = without(cell, i);
      auto it = face_id.find(face);
      if (it == face_id.end()) {
        it = face_id.emplace(face, static_cast<int>(m.faces.size())).first;
        m.faces.push_back(face);
        m.face_cells.push_back({static_cast<int>(c), -1});
      } else {
        auto& fc = m.face_cells[it->second];
        if (fc[1] != -1) throw Error(ErrorKind::Incompatibility, "face shared by more than two cells");
        fc[1] = static_cast<int>(c);
      }
      m.cell_faces[c].push_back(it->second);
    }
    for (const auto& [i, j] : pairs) {
      auto ridge = without(cell, i, j);
      auto it = ridge_id.find(ridge);
      if (it == ridge_id.end()) {
        it = ridge_id.emplace(ridge, static_cast<int>(m.ridges.size())).first;
        m.ridges.push_back(ridge);
        m.ridge_cells.emplace_back();
      }
      m.ridge_cells[it->second].push_back(static_cast<int>(c));
      m.cell_ridges[c].push_back(it->second);
    }
  }
  m.face_ridges.resize(m.faces.size());
  m.face_boundary.resize(m.faces.size());
  m.ridge_boundary.assign(m.ridges.size(), false);
  for (size_t f = 0; f < m.faces.size(); ++f) {
    for (int j = 0; j < dim; ++j) m.face_ridges[f].push_back(ridge_id.at(without(m.faces[f], j)));
    m.face_boundary[f] = m.face_cells[f][1] == -1;
    if (m.face_boundary[f])
      for (int e : m.face_ridges[f]) m.ridge_boundary[e] = true;
  }
  if (dim == 2) {
    m.edges = m.faces;
    m.edge_boundary = m.face_boundary;
  } else {
    m.edges = m.ridges;
    m.edge_boundary = m.ridge_boundary;
  }
  return m;
}

SimplicialMesh build_box_mesh(int dim, int n) {
  if (dim != 2 && dim != 3) throw Error(ErrorKind::UnsupportedDimension, "dimension " + std::to_string(dim));
  if (n < 1) throw Error(ErrorKind::OutOfRange, "cells per axis must be >= 1");
  const int np = n + 1;
  std::vector<std::vector<int>> cells;
  Mat coords;
  if (dim == 2) {
    coords.resize(2, np * np);
    for (int j = 0; j < np; ++j)
      for (int i = 0; i < np; ++i) coords.col(i + np * j) << double(i) / n, double(j) / n;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const int v00 = i + np * j, v10 = v00 + 1, v01 = v00 + np, v11 = v01 + 1;
        cells.push_back({v00, v10, v11});
        cells.push_back({v00, v11, v01});
      }
  } else {
    coords.resize(3, np * np * np);
    auto id = [np](int i, int j, int k) { return i + np * (j + np * k); };
    for (int k = 0; k < np; ++k)
      for (int j = 0; j < np; ++j)
        for (int i = 0; i < np; ++i) coords.col(id(i, j, k)) << double(i) / n, double(j) / n, double(k) / n;
    std::array<int, 3> perm = {0, 1, 2};
    std::vector<std::array<int, 3>> perms;
    do perms.push_back(perm);
    while (std::next_permutation(perm.begin(), perm.end()));
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
          for (const auto& p : perms) {
            std::array<int, 3> pos = {i, j, k};
            std::vector<int> tet = {id(pos[0], pos[1], pos[2])};
            for (int s = 0; s < 3; ++s) {
              pos[p[s]] += 1;
              tet.push_back(id(pos[0], pos[1], pos[2]));
            }
            cells.push_back(tet);
          }
  }
  return build_mesh(dim, coords, std::move(cells));
}

const std::vector<int>& ridge_patch(const SimplicialMesh& mesh, int e) {
  if (e < 0 || e >= mesh.num_ridges()) throw Error(ErrorKind::OutOfRange, "ridge id " + std::to_string(e));
  return mesh.ridge_cells[e];
}

EntityFrames compute_frames(const SimplicialMesh& mesh) {
  const int d = mesh.dim;
  EntityFrames fr;
  fr.cells.resize(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Mat v = mesh.cell_vertices(c);
    auto& cf = fr.cells[c];
    cf.diameter = simplex_diameter(v);
    cf.volume = simplex_measure(v);
    if (cf.volume <= 1e-14 * std::pow(cf.diameter, d))
      throw Error(ErrorKind::DegenerateCell, "cell " + std::to_string(c) + " has zero volume");
    cf.centroid = v.rowwise().mean();
    for (int i = 0; i <= d; ++i) cf.outward_normals.push_back(facet_normal(drop_columns(v, i), v.col(i)));
  }
  fr.faces.resize(mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Mat v = mesh.face_vertices(f);
    auto& ff = fr.faces[f];
    const int c0 = mesh.face_cells[f][0];
    const auto& cf = mesh.cell_faces[c0];
    const int local = static_cast<int>(std::find(cf.begin(), cf.end(), f) - cf.begin());
    ff.normal = fr.cells[c0].outward_normals[local];
    ff.tangents = edge_tangents(v);
    ff.diameter = simplex_diameter(v);
    ff.measure = simplex_measure(v);
    ff.centroid = v.rowwise().mean();
    for (int j = 0; j < d; ++j) ff.conormals.push_back(ridge_conormal(drop_columns(v, j), v.col(j)));
  }
  for (int c = 0; c < mesh.num_cells(); ++c)
    for (int i = 0; i <= d; ++i) {
      const double s = fr.faces[mesh.cell_faces[c][i]].normal.dot(fr.cells[c].outward_normals[i]);
      fr.cells[c].face_signs.push_back(s > 0 ? 1 : -1);
    }
  fr.ridges.resize(mesh.num_ridges());
  for (int e = 0; e < mesh.num_ridges(); ++e) {
    const Mat v = mesh.ridge_vertices(e);
    auto& rf = fr.ridges[e];
    rf.centroid = v.rowwise().mean();
    if (d == 2) {
      double sum = 0.0;
      for (int c : mesh.ridge_cells[e]) sum += fr.cells[c].diameter;
      rf.diameter = sum / static_cast<double>(mesh.ridge_cells[e].size());
      rf.measure = 1.0;
    } else {
      rf.diameter = simplex_diameter(v);
      rf.measure = simplex_measure(v);
    }
  }
  return fr;
}

CellGeometry make_cell_geometry(const Mat& v) {
  CellGeometry g;
  g.dim = static_cast<int>(v.rows());
  const int d = g.dim;
  g.cell = make_carrier(v, ChartOrigin::Centroid);
  for (int i = 0; i <= d; ++i) {
    const Mat fv = drop_columns(v, i);
    g.faces.push_back(make_carrier(fv, ChartOrigin::FirstVertex));
    g.normals.push_back(facet_normal(fv, v.col(i)));
  }
  for (const auto& [i, j] : local_pairs(d)) {
    const Mat rv = drop_columns(v, i, j);
    g.ridges.push_back(make_carrier(rv, ChartOrigin::FirstVertex));
    g.ridge_conormals.push_back({ridge_conormal(rv, v.col(j)), ridge_conormal(rv, v.col(i))});
  }
  return g;
}

CellGeometry make_cell_geometry(const SimplicialMesh& mesh, const EntityFrames& frames, int cell) {
  CellGeometry g = make_cell_geometry(mesh.cell_vertices(cell));
  for (size_t p = 0; p < g.ridges.size(); ++p)
    g.ridges[p].diameter = frames.ridges[mesh.cell_ridges[cell][p]].diameter;
  return g;
}

Carrier face_carrier(const SimplicialMesh& mesh, int f) {
  return make_carrier(mesh.face_vertices(f), ChartOrigin::FirstVertex);
}

Carrier ridge_carrier(const SimplicialMesh& mesh, const EntityFrames& frames, int e) {
  Carrier c = make_carrier(mesh.ridge_vertices(e), ChartOrigin::FirstVertex);
  c.diameter = frames.ridges[e].diameter;
  return c;
}

void write_mesh(const SimplicialMesh& mesh, std::ostream& out) {
  out << std::setprecision(17);
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    out << 'v';
    for (int a = 0; a < mesh.dim; ++a) out << ' ' << mesh.coords(a, i);
    out << '\n';
  }
  for (const auto& cell : mesh.cells) {
    out << 'c';
    for (int v : cell) out << ' ' << v;
    out << '\n';
  }
}

}  // namespace divdiv
