#include "garment/mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>

#include "garment/errors.hpp"

namespace garment {

void validate_mesh(const Mesh& mesh) {
  const int n = mesh.vertex_count();
  if (mesh.V.cols() != 3) throw InvalidInput("mesh vertices must be #V x 3");
  if (mesh.F.size() > 0 && mesh.F.cols() != 3)
    throw InvalidInput("mesh faces must be #F x 3");
  for (int f = 0; f < mesh.face_count(); ++f) {
    const int a = mesh.F(f, 0), b = mesh.F(f, 1), c = mesh.F(f, 2);
    if (a < 0 || b < 0 || c < 0 || a >= n || b >= n || c >= n)
      throw InvalidInput("face " + std::to_string(f) + " references vertex out of range");
    if (a == b || b == c || a == c)
      throw InvalidInput("face " + std::to_string(f) + " is degenerate (repeated vertex index)");
  }
}

bool same_topology(const Mesh& a, const Mesh& b) {
  return a.vertex_count() == b.vertex_count() && a.F.rows() == b.F.rows() && a.F == b.F;
}

Eigen::MatrixXd face_normals(const Mesh& mesh) {
  Eigen::MatrixXd N(mesh.face_count(), 3);
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Eigen::Vector3d a = mesh.V.row(mesh.F(f, 0));
    const Eigen::Vector3d b = mesh.V.row(mesh.F(f, 1));
    const Eigen::Vector3d c = mesh.V.row(mesh.F(f, 2));
    Eigen::Vector3d n = (b - a).cross(c - a);
    const double len = n.norm();
    N.row(f) = len > 0.0 ? Eigen::Vector3d(n / len) : Eigen::Vector3d::Zero();
  }
  return N;
}

VertexNormals vertex_normals(const Mesh& mesh) {
  VertexNormals out;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(mesh.vertex_count(), 3);
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Eigen::Vector3d a = mesh.V.row(mesh.F(f, 0));
    const Eigen::Vector3d b = mesh.V.row(mesh.F(f, 1));
    const Eigen::Vector3d c = mesh.V.row(mesh.F(f, 2));
    const Eigen::Vector3d n = (b - a).cross(c - a);  // area-weighted
    for (int k = 0; k < 3; ++k) acc.row(mesh.F(f, k)) += n;
  }
  out.N.resize(mesh.vertex_count(), 3);
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    const double len = acc.row(v).norm();
    if (len < 1e-30) {
      out.N.row(v).setZero();
      out.degenerate.push_back(v);
    } else {
      out.N.row(v) = acc.row(v) / len;
    }
  }
  return out;
}

namespace {

std::map<std::array<int, 2>, std::vector<int>> edge_face_map(const Mesh& mesh) {
  std::map<std::array<int, 2>, std::vector<int>> edges;
  for (int f = 0; f < mesh.face_count(); ++f) {
    for (int k = 0; k < 3; ++k) {
      int i = mesh.F(f, k), j = mesh.F(f, (k + 1) % 3);
      if (i > j) std::swap(i, j);
      edges[{i, j}].push_back(f);
    }
  }
  return edges;
}

}  // namespace

std::vector<std::array<int, 2>> mesh_edges(const Mesh& mesh) {
  std::vector<std::array<int, 2>> out;
  for (const auto& [e, faces] : edge_face_map(mesh)) out.push_back(e);
  return out;
}

std::vector<InteriorEdge> interior_edges(const Mesh& mesh) {
  std::vector<InteriorEdge> out;
  for (const auto& [e, faces] : edge_face_map(mesh)) {
    if (faces.size() > 2)
      throw InvalidInput("non-manifold edge (" + std::to_string(e[0]) + "," +
                         std::to_string(e[1]) + ") used by " + std::to_string(faces.size()) +
                         " faces");
    if (faces.size() == 2) out.push_back({e[0], e[1], faces[0], faces[1]});
  }
  return out;
}

std::vector<std::vector<int>> vertex_adjacency(const Mesh& mesh) {
  std::vector<std::vector<int>> adj(mesh.vertex_count());
  for (const auto& e : mesh_edges(mesh)) {
    adj[e[0]].push_back(e[1]);
    adj[e[1]].push_back(e[0]);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

Eigen::VectorXd edge_lengths(const Mesh& mesh) {
  const auto edges = mesh_edges(mesh);
  Eigen::VectorXd out(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k)
    out[k] = (mesh.V.row(edges[k][0]) - mesh.V.row(edges[k][1])).norm();
  return out;
}

std::vector<std::pair<InteriorEdge, double>> dihedral_angles(const Mesh& mesh) {
  const Eigen::MatrixXd N = face_normals(mesh);
  std::vector<std::pair<InteriorEdge, double>> out;
  for (const auto& e : interior_edges(mesh)) {
    const Eigen::Vector3d n0 = N.row(e.f0), n1 = N.row(e.f1);
    double c = n0.dot(n1);
    c = std::clamp(c, -1.0, 1.0);
    const double angle = (n0.isZero() || n1.isZero()) ? 0.0 : std::acos(c);
    out.emplace_back(e, angle);
  }
  return out;
}

double bounding_box_diagonal(const Mesh& mesh) {
  if (mesh.vertex_count() == 0) return 0.0;
  const Eigen::Vector3d lo = mesh.V.colwise().minCoeff();
  const Eigen::Vector3d hi = mesh.V.colwise().maxCoeff();
  return (hi - lo).norm();
}

}  // namespace garment
