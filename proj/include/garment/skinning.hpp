#pragma once

#include <Eigen/Dense>

#include "garment/mesh.hpp"
#include "garment/shape_space.hpp"
#include "garment/skeleton.hpp"

namespace garment {

// posed_i = sum_j w_ij * transform_j(vertex_i).
Eigen::MatrixXd linear_blend_skin(const Eigen::MatrixXd& vertices, const SkinningWeights& weights,
                                  const std::vector<RigidTransform>& transforms);

struct WeightInterpolationConfig {
  int k = 256;                 // nearest body vertices per garment vertex
  double epsilon = 1e-8;       // inverse-distance regularizer
  int distance_exponent = 1;   // weight proportional to 1/(d + eps)^exponent
  int smoothing_iterations = 10;
  double smoothing_step = 0.5; // in (0, 1]
};

// Copies body skinning weights onto garment vertices: inverse-distance blend
// of the K nearest body vertices (lowest-index tie break), then uniform graph
// smoothing on the garment mesh with row renormalization after every round.
// garment_mesh supplies the smoothing graph; it may be omitted (empty faces)
// only when smoothing_iterations == 0.
SkinningWeights interpolate_skinning_weights(const Eigen::MatrixXd& garment_vertices, const Skeleton& skeleton,
                                             const WeightInterpolationConfig& config, const Mesh& garment_mesh);

// Skinning proposal M_p: decode the coefficients, interpolate weights in rest
// pose, then pose. Connectivity is the template's.
Mesh skin_garment(const ShapeSpace& space, const Eigen::VectorXd& alpha, const Skeleton& skeleton, const Pose& pose,
                  const WeightInterpolationConfig& config);

}  // namespace garment
