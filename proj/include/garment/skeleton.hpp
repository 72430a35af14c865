#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "garment/mesh.hpp"

namespace garment {

// Dense vertex-by-joint weight matrix. Rows are convex combinations.
using SkinningWeights = Eigen::MatrixXd;

// Throws InvalidInput unless every entry is >= -1e-12 and every row sums to 1
// within 1e-9.
void validate_skinning_weights(const SkinningWeights& W);

struct Skeleton {
  Eigen::MatrixXd joint_rest_positions;  // |J| x 3, meters
  std::vector<int> parents;              // -1 marks the root
  std::vector<std::string> joint_names;
  Mesh body_mesh;                        // rest-pose body T_h
  SkinningWeights body_weights;          // |T_h| x |J|

  int joint_count() const { return static_cast<int>(parents.size()); }
};

// Checks tree structure (single root, no cycles), matching sizes, and body
// weight validity.
void validate_skeleton(const Skeleton& skeleton);

struct Pose {
  Eigen::MatrixXd theta;           // |J| x 3 axis-angle (radians * axis)
  Eigen::Vector3d root_translation = Eigen::Vector3d::Zero();
};

struct PoseSequence {
  double fps = 30.0;
  std::vector<Pose> frames;
};

// Rigid transform y = R x + t.
struct RigidTransform {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return R * x + t; }
  RigidTransform compose(const RigidTransform& inner) const {
    return {R * inner.R, R * inner.t + t};
  }
};

// Rotation matrix for an axis-angle vector (angle = |v|, axis = v/|v|); small
// angles use the series expansion to stay finite at v = 0.
Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis_angle);

// Global per-joint rigid transforms mapping rest-pose space to posed space.
// Joint j rotates by rodrigues(theta_j) about its rest position, composed with
// its parent's global transform; the root transform additionally translates by
// pose.root_translation.
std::vector<RigidTransform> pose_skeleton(const Skeleton& skeleton, const Pose& pose);

// Skeleton JSON holds joints/parents/names inline and references the body mesh
// and weight files by path, resolved relative to the JSON file's directory.
Skeleton load_skeleton(const std::filesystem::path& path);
void save_skeleton(const std::filesystem::path& path, const Skeleton& skeleton,
                   const std::string& body_mesh_file, const std::string& body_weights_file);

PoseSequence load_pose_sequence(const std::filesystem::path& path);
void save_pose_sequence(const std::filesystem::path& path, const PoseSequence& sequence);

}  // namespace garment
