#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "garment/mesh.hpp"

namespace garment {

// Linear garment shape space built from canonical-pose meshes sharing one
// topology. A mesh x (vertices flattened row-major to length 3N) decomposes as
// x = G + C * alpha with orthonormal columns C.
struct ShapeSpace {
  Eigen::VectorXd G;               // length 3N mean shape
  Eigen::MatrixXd C;               // 3N x d, orthonormal columns
  Eigen::VectorXd singular_values; // length d, non-increasing
  Eigen::MatrixXi faces;           // template connectivity

  int d() const { return static_cast<int>(C.cols()); }
  int vertex_count() const { return static_cast<int>(G.size() / 3); }
};

// Fits mean + top-d principal directions of the centered training set.
// d <= min(3N, sampleCount); directions beyond the numerical rank of the
// centered data are rejected rather than padded with arbitrary vectors.
// Column signs are fixed so the largest-magnitude entry of each column is
// positive (ties broken by lowest row index).
ShapeSpace fit_pca(const std::vector<Mesh>& canonical_meshes, int d);

// Default component count: min(64, sampleCount - 1).
int default_component_count(int sample_count);

// alpha = C^T (x - G). Throws InvalidInput on topology mismatch.
Eigen::VectorXd encode(const ShapeSpace& space, const Mesh& mesh);

// reshape(G + C alpha) with the template faces. Throws InvalidInput if
// alpha.size() != d.
Mesh decode(const ShapeSpace& space, const Eigen::VectorXd& alpha);

void save_shape_space(const std::filesystem::path& path, const ShapeSpace& space);
ShapeSpace load_shape_space(const std::filesystem::path& path);

// Flatten N x 3 vertices to a length-3N vector (row-major) and back.
Eigen::VectorXd flatten_vertices(const Eigen::MatrixXd& V);
Eigen::MatrixXd unflatten_vertices(const Eigen::VectorXd& x);

}  // namespace garment
