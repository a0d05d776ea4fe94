#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "divdiv/common.hpp"
#include "divdiv/simplex.hpp"

namespace divdiv {

/// Conforming simplicial triangulation in 2D or 3D.
///
/// Every entity is stored as a sorted tuple of vertex ids. Faces have
/// codimension one, ridges codimension two (vertices in 2D). Local numbering:
/// cell_faces[c][i] is the face opposite local vertex i, cell_ridges[c][p] is
/// the ridge opposite the local vertex pair local_pairs(dim)[p], and
/// face_ridges[f][j] is the ridge opposite local vertex j of the face.
struct SimplicialMesh {
  int dim = 0;
  Mat coords;  // dim x num_vertices
  std::vector<std::vector<int>> cells;
  std::vector<std::vector<int>> faces;
  std::vector<std::vector<int>> ridges;
  std::vector<std::vector<int>> cell_faces;
  std::vector<std::vector<int>> cell_ridges;
  std::vector<std::vector<int>> face_ridges;
  std::vector<std::array<int, 2>> face_cells;  // second entry -1 on the boundary
  std::vector<std::vector<int>> ridge_cells;
  std::vector<bool> face_boundary;
  std::vector<bool> ridge_boundary;
  std::vector<bool> cell_parity;  // true when the sorted order has negative orientation
  // Edges (1-simplices). Equal to faces in 2D and ridges in 3D.
  std::vector<std::vector<int>> edges;
  std::vector<bool> edge_boundary;

  int num_vertices() const { return static_cast<int>(coords.cols()); }
  int num_cells() const { return static_cast<int>(cells.size()); }
  int num_faces() const { return static_cast<int>(faces.size()); }
  int num_ridges() const { return static_cast<int>(ridges.size()); }
  Mat cell_vertices(int c) const;
  Mat face_vertices(int f) const;
  Mat ridge_vertices(int e) const;
  int num_interior_faces() const;
  int num_interior_ridges() const;
};

/// Local vertex pairs (i < j) in lexicographic order.
const std::vector<std::pair<int, int>>& local_pairs(int dim);

/// Unit square with 2n^2 triangles (one diagonal per square) or unit cube with
/// 6n^3 tetrahedra (Kuhn split along the main diagonal).
SimplicialMesh build_box_mesh(int dim, int n);

/// Builds all entities from a vertex array and cells (any vertex order).
SimplicialMesh build_mesh(int dim, const Mat& coords, std::vector<std::vector<int>> cells);

/// Cells containing ridge e.
const std::vector<int>& ridge_patch(const SimplicialMesh& mesh, int e);

struct FaceFrame {
  Vec normal;   // global normal n_F
  Mat tangents; // dim x (dim-1), orthonormal
  double diameter = 0.0;
  double measure = 0.0;
  Vec centroid;
  std::vector<Vec> conormals;  // per face-local ridge j: outward conormal n_{F,e}
};

struct RidgeFrame {
  double diameter = 0.0;  // 2D: mean cell diameter over the patch
  double measure = 0.0;   // 2D: 1 (point evaluation)
  Vec centroid;
};

struct CellFrame {
  double diameter = 0.0;
  double volume = 0.0;
  Vec centroid;
  std::vector<Vec> outward_normals;  // per local face
  std::vector<int> face_signs;       // s_{T,F} = n_F . n_{dT}
};

struct EntityFrames {
  std::vector<FaceFrame> faces;
  std::vector<RidgeFrame> ridges;
  std::vector<CellFrame> cells;
};

EntityFrames compute_frames(const SimplicialMesh& mesh);

/// Local geometry of one cell: carriers for the cell and its sub-entities plus
/// normals and conormals. Face and ridge carriers only depend on the entity's
/// sorted vertices, so neighbouring cells see identical entity charts.
struct CellGeometry {
  int dim = 0;
  Carrier cell;
  std::vector<Carrier> faces;         // opposite local vertex i
  std::vector<Vec> normals;           // outward normals per local face
  std::vector<Carrier> ridges;        // per local pair
  std::vector<std::array<Vec, 2>> ridge_conormals;  // conormal within F_i and F_j for pair (i,j)
};

/// Vertices must be given in the cell's local order (sorted ids for mesh cells).
CellGeometry make_cell_geometry(const Mat& vertices);
CellGeometry make_cell_geometry(const SimplicialMesh& mesh, const EntityFrames& frames, int cell);

/// Carrier for a global face or ridge (chart at the lowest-id vertex).
Carrier face_carrier(const SimplicialMesh& mesh, int f);
Carrier ridge_carrier(const SimplicialMesh& mesh, const EntityFrames& frames, int e);

/// Plain-text dump: "v x y [z]" per vertex then "c i0 .. id" per cell.
void write_mesh(const SimplicialMesh& mesh, std::ostream& out);

}  // namespace divdiv
