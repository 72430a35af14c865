#pragma once

#include <Eigen/Core>
#include <array>
#include <utility>
#include <vector>

namespace garment {

// Triangle mesh. Positions are in meters. Faces index into V; every face
// must have three distinct in-range indices.
struct Mesh {
  Eigen::MatrixXd V;  // #V x 3 vertex positions
  Eigen::MatrixXi F;  // #F x 3 vertex indices

  int vertex_count() const { return static_cast<int>(V.rows()); }
  int face_count() const { return static_cast<int>(F.rows()); }
};

// Throws InvalidInput if any face index is out of range or a face repeats
// a vertex index.
void validate_mesh(const Mesh& mesh);

// True when both meshes have identical vertex counts and bit-identical
// face connectivity.
bool same_topology(const Mesh& a, const Mesh& b);

// Unit face normals; zero vector for geometrically degenerate faces.
Eigen::MatrixXd face_normals(const Mesh& mesh);

// Area-weighted unit vertex normals. Vertices whose incident faces all have
// (near) zero area get a zero normal and are reported in `degenerate`.
struct VertexNormals {
  Eigen::MatrixXd N;            // #V x 3, unit rows (or zero)
  std::vector<int> degenerate;  // vertices with zero-area stars
};
VertexNormals vertex_normals(const Mesh& mesh);

// Unique undirected edges (i < j), sorted lexicographically.
std::vector<std::array<int, 2>> mesh_edges(const Mesh& mesh);

// Interior edge: an undirected edge shared by exactly two faces.
struct InteriorEdge {
  int v0, v1;  // edge endpoints, v0 < v1
  int f0, f1;  // the two incident faces, f0 < f1
};
// Throws InvalidInput if any edge is used by more than two faces.
std::vector<InteriorEdge> interior_edges(const Mesh& mesh);

// 1-ring vertex adjacency, each list sorted ascending.
std::vector<std::vector<int>> vertex_adjacency(const Mesh& mesh);

// Per-edge rest lengths in the order produced by mesh_edges().
Eigen::VectorXd edge_lengths(const Mesh& mesh);

// Dihedral angle (radians, in [0, pi]) between face normals across each
// interior edge. Degenerate faces yield angle 0.
std::vector<std::pair<InteriorEdge, double>> dihedral_angles(const Mesh& mesh);

// Length of the bounding-box diagonal.
double bounding_box_diagonal(const Mesh& mesh);

}  // namespace garment
