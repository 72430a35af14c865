#include "garment/skinning.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "garment/errors.hpp"
#include "garment/spatial.hpp"

namespace garment {

Eigen::MatrixXd linear_blend_skin(const Eigen::MatrixXd& vertices, const SkinningWeights& weights,
                                  const std::vector<RigidTransform>& transforms) {
  if (weights.rows() != vertices.rows())
    throw InvalidInput("weight rows (" + std::to_string(weights.rows()) + ") do not match vertex count (" +
                       std::to_string(vertices.rows()) + ")");
  if (weights.cols() != static_cast<Eigen::Index>(transforms.size()))
    throw InvalidInput("weight columns (" + std::to_string(weights.cols()) + ") do not match transform count (" +
                       std::to_string(transforms.size()) + ")");
  validate_skinning_weights(weights);

  Eigen::MatrixXd posed = Eigen::MatrixXd::Zero(vertices.rows(), 3);
  for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
    const Eigen::Vector3d x = vertices.row(i).transpose();
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (std::size_t j = 0; j < transforms.size(); ++j) {
      const double w = weights(i, static_cast<Eigen::Index>(j));
      if (w != 0.0) acc += w * transforms[j].apply(x);
    }
    posed.row(i) = acc.transpose();
  }
  return posed;
}

SkinningWeights interpolate_skinning_weights(const Eigen::MatrixXd& garment_vertices, const Skeleton& skeleton,
                                             const WeightInterpolationConfig& config, const Mesh& garment_mesh) {
  validate_skeleton(skeleton);
  const Eigen::Index body_count = skeleton.body_mesh.vertex_count();
  if (config.k < 1 || config.k > body_count)
    throw InvalidInput("K must be in [1, " + std::to_string(body_count) + "], got " + std::to_string(config.k));
  if (config.distance_exponent != 1 && config.distance_exponent != 2)
    throw InvalidInput("distance exponent must be 1 or 2");
  if (config.smoothing_iterations < 0) throw InvalidInput("smoothing iterations must be >= 0");
  if (config.smoothing_iterations > 0 &&
      !(config.smoothing_step > 0.0 && config.smoothing_step <= 1.0))
    throw InvalidInput("smoothing step must be in (0, 1]");
  if (config.smoothing_iterations > 0 && garment_mesh.face_count() == 0)
    throw InvalidInput("garment mesh connectivity is required when smoothing is enabled");
  if (config.smoothing_iterations > 0 && garment_mesh.V.rows() != garment_vertices.rows())
    throw InvalidInput("garment mesh vertex count does not match the vertices being weighted");

  const PointKdTree tree(skeleton.body_mesh.V);
  SkinningWeights W(garment_vertices.rows(), skeleton.joint_count());
  for (Eigen::Index i = 0; i < garment_vertices.rows(); ++i) {
    const Eigen::Vector3d p = garment_vertices.row(i).transpose();
    const std::vector<int> neighbors = tree.knearest(p, config.k);
    if (config.k == 1) {
      // Nearest-vertex copy, bit for bit; blending would round.
      W.row(i) = skeleton.body_weights.row(neighbors[0]);
      continue;
    }
    double total = 0.0;
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(skeleton.joint_count());
    for (int idx : neighbors) {
      double denom = (skeleton.body_mesh.V.row(idx).transpose() - p).norm() + config.epsilon;
      if (config.distance_exponent == 2) denom *= denom;
      const double iw = 1.0 / denom;
      row += iw * skeleton.body_weights.row(idx);
      total += iw;
    }
    W.row(i) = row / total;
  }

  if (config.smoothing_iterations > 0) {
    const std::vector<std::vector<int>> adjacency = vertex_adjacency(garment_mesh);
    const double s = config.smoothing_step;
    for (int iter = 0; iter < config.smoothing_iterations; ++iter) {
      SkinningWeights next = W;
      for (Eigen::Index i = 0; i < W.rows(); ++i) {
        const auto& nbrs = adjacency[static_cast<std::size_t>(i)];
        if (nbrs.empty()) continue;
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(W.cols());
        for (int n : nbrs) mean += W.row(n);
        mean /= static_cast<double>(nbrs.size());
        next.row(i) = (1.0 - s) * W.row(i) + s * mean;
        next.row(i) /= next.row(i).sum();
      }
      W = std::move(next);
    }
  }
  return W;
}

Mesh skin_garment(const ShapeSpace& space, const Eigen::VectorXd& alpha, const Skeleton& skeleton, const Pose& pose,
                  const WeightInterpolationConfig& config) {
  Mesh canonical = decode(space, alpha);
  const SkinningWeights weights = interpolate_skinning_weights(canonical.V, skeleton, config, canonical);
  const std::vector<RigidTransform> transforms = pose_skeleton(skeleton, pose);
  Mesh posed;
  posed.V = linear_blend_skin(canonical.V, weights, transforms);
  posed.F = canonical.F;
  return posed;
}

}  // namespace garment
