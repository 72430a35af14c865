#pragma once

#include <filesystem>

#include "garment/mesh.hpp"

namespace garment {

// Per template vertex: the nearest face of a registered mesh and the clamped
// barycentric weights of the template vertex's projection onto that face.
// Replaying the weights on any frame that shares the registered mesh's
// topology re-meshes the frame to the template topology.
struct BarycentricMap {
  Eigen::VectorXi face;     // #template-verts, face index into the registered mesh
  Eigen::MatrixXd weights;  // #template-verts x 3, each row in [0,1], sums to 1
  Eigen::MatrixXi template_faces;
  int registered_vertex_count = 0;
  Eigen::MatrixXi registered_faces;
};

BarycentricMap build_barycentric_map(const Mesh& templ, const Mesh& registered);

// Throws InvalidInput when `frame` does not share the registered mesh's
// topology. The output carries the template connectivity.
Mesh apply_barycentric_map(const BarycentricMap& map, const Mesh& frame);

void save_barycentric_map(const std::filesystem::path& path, const BarycentricMap& map);
BarycentricMap load_barycentric_map(const std::filesystem::path& path);

}  // namespace garment
