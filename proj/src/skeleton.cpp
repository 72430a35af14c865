#include "garment/skeleton.hpp"

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "garment/errors.hpp"
#include "garment/io_util.hpp"
#include "garment/obj_io.hpp"
#include "garment/tensor_file.hpp"

namespace garment {

void validate_skinning_weights(const SkinningWeights& W) {
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      const double w = W(i, j);
      if (!std::isfinite(w) || w < -1e-12)
        throw InvalidInput("skinning weight (" + std::to_string(i) + "," + std::to_string(j) + ") is negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw InvalidInput("skinning weight row " + std::to_string(i) + " sums to " + std::to_string(sum) +
                         ", expected 1");
  }
}

void validate_skeleton(const Skeleton& skeleton) {
  const int n = skeleton.joint_count();
  if (n < 1) throw InvalidInput("skeleton has no joints");
  if (skeleton.joint_rest_positions.rows() != n)
    throw InvalidInput("joint position count does not match parent count");
  if (!skeleton.joint_names.empty() && static_cast<int>(skeleton.joint_names.size()) != n)
    throw InvalidInput("joint name count does not match parent count");

  int roots = 0;
  for (int j = 0; j < n; ++j) {
    const int p = skeleton.parents[j];
    if (p == -1) {
      ++roots;
      continue;
    }
    if (p < 0 || p >= n) throw InvalidInput("joint " + std::to_string(j) + " has out-of-range parent");
    // Walk to the root; revisiting a joint or taking more than n steps means a cycle.
    int cur = p;
    int steps = 0;
    while (cur != -1) {
      if (++steps > n) throw InvalidInput("skeleton parents contain a cycle through joint " + std::to_string(j));
      cur = skeleton.parents[cur];
    }
  }
  if (roots != 1) throw InvalidInput("skeleton must have exactly one root (-1 parent), found " + std::to_string(roots));

  validate_mesh(skeleton.body_mesh);
  if (skeleton.body_weights.rows() != skeleton.body_mesh.vertex_count() || skeleton.body_weights.cols() != n)
    throw InvalidInput("body weight matrix must be |body vertices| x |joints|");
  validate_skinning_weights(skeleton.body_weights);
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis_angle) {
  if (!axis_angle.allFinite()) throw InvalidInput("axis-angle entries must be finite");
  const double angle = axis_angle.norm();
  Eigen::Matrix3d K;
  K << 0, -axis_angle.z(), axis_angle.y(),
      axis_angle.z(), 0, -axis_angle.x(),
      -axis_angle.y(), axis_angle.x(), 0;
  // R = I + sin(a)/a K + (1-cos(a))/a^2 K^2; the coefficients go through their
  // series for small a so the unnormalized K can be used directly.
  double c1, c2;
  if (angle < 1e-8) {
    c1 = 1.0 - angle * angle / 6.0;
    c2 = 0.5 - angle * angle / 24.0;
  } else {
    c1 = std::sin(angle) / angle;
    c2 = (1.0 - std::cos(angle)) / (angle * angle);
  }
  return Eigen::Matrix3d::Identity() + c1 * K + c2 * (K * K);
}

std::vector<RigidTransform> pose_skeleton(const Skeleton& skeleton, const Pose& pose) {
  const int n = skeleton.joint_count();
  if (pose.theta.rows() != n || pose.theta.cols() != 3)
    throw InvalidInput("pose has " + std::to_string(pose.theta.rows()) + " joint rotations, skeleton has " +
                       std::to_string(n));
  if (!pose.root_translation.allFinite()) throw InvalidInput("root translation must be finite");

  std::vector<RigidTransform> global(n);
  std::vector<bool> done(n, false);
  // Parents form a tree, so repeatedly resolving joints whose parent is done
  // terminates in at most n sweeps.
  int resolved = 0;
  while (resolved < n) {
    const int before = resolved;
    for (int j = 0; j < n; ++j) {
      if (done[j]) continue;
      const int p = skeleton.parents[j];
      if (p != -1 && !done[p]) continue;
      const Eigen::Vector3d joint = skeleton.joint_rest_positions.row(j).transpose();
      RigidTransform local;
      local.R = rodrigues(pose.theta.row(j).transpose());
      local.t = joint - local.R * joint;
      if (p == -1) {
        local.t += pose.root_translation;
        global[j] = local;
      } else {
        global[j] = global[p].compose(local);
      }
      done[j] = true;
      ++resolved;
    }
    if (resolved == before) throw InvalidInput("skeleton parents contain a cycle");
  }
  return global;
}

namespace {

nlohmann::json parse_json_file(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

Eigen::Vector3d read_vec3(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw InvalidInput(what + " must be a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

Skeleton load_skeleton(const std::filesystem::path& path) {
  const nlohmann::json j = parse_json_file(path);
  const std::filesystem::path dir = path.parent_path();
  Skeleton skeleton;
  try {
    const auto& joints = j.at("joints");
    skeleton.joint_rest_positions.resize(static_cast<Eigen::Index>(joints.size()), 3);
    for (std::size_t i = 0; i < joints.size(); ++i)
      skeleton.joint_rest_positions.row(static_cast<Eigen::Index>(i)) =
          read_vec3(joints[i], "joint position").transpose();
    skeleton.parents = j.at("parents").get<std::vector<int>>();
    if (j.contains("names")) skeleton.joint_names = j.at("names").get<std::vector<std::string>>();
    skeleton.body_mesh = load_obj(dir / j.at("bodyMesh").get<std::string>());
    const TensorMap weights = load_tensors(dir / j.at("bodyWeights").get<std::string>());
    skeleton.body_weights = tensor_f64(weights, "weights");
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  validate_skeleton(skeleton);
  return skeleton;
}

void save_skeleton(const std::filesystem::path& path, const Skeleton& skeleton,
                   const std::string& body_mesh_file, const std::string& body_weights_file) {
  validate_skeleton(skeleton);
  const std::filesystem::path dir = path.parent_path();
  save_obj(dir / body_mesh_file, skeleton.body_mesh);
  TensorMap weights;
  weights.emplace("weights", Tensor::from(skeleton.body_weights));
  save_tensors(dir / body_weights_file, weights);

  nlohmann::json j;
  j["joints"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < skeleton.joint_rest_positions.rows(); ++i)
    j["joints"].push_back({skeleton.joint_rest_positions(i, 0), skeleton.joint_rest_positions(i, 1),
                           skeleton.joint_rest_positions(i, 2)});
  j["parents"] = skeleton.parents;
  j["names"] = skeleton.joint_names;
  j["bodyMesh"] = body_mesh_file;
  j["bodyWeights"] = body_weights_file;
  write_file_atomic(path, j.dump(2) + "\n");
}

PoseSequence load_pose_sequence(const std::filesystem::path& path) {
  const nlohmann::json j = parse_json_file(path);
  PoseSequence sequence;
  try {
    sequence.fps = j.at("fps").get<double>();
    if (!(sequence.fps > 0.0)) throw InvalidInput(path.string() + ": fps must be positive");
    for (const auto& frame : j.at("frames")) {
      Pose pose;
      pose.root_translation = read_vec3(frame.at("rootTranslation"), "rootTranslation");
      const auto& theta = frame.at("theta");
      pose.theta.resize(static_cast<Eigen::Index>(theta.size()), 3);
      for (std::size_t i = 0; i < theta.size(); ++i)
        pose.theta.row(static_cast<Eigen::Index>(i)) = read_vec3(theta[i], "theta entry").transpose();
      if (!pose.theta.allFinite()) throw InvalidInput(path.string() + ": non-finite pose angles");
      sequence.frames.push_back(std::move(pose));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  return sequence;
}

void save_pose_sequence(const std::filesystem::path& path, const PoseSequence& sequence) {
  nlohmann::json j;
  j["fps"] = sequence.fps;
  j["frames"] = nlohmann::json::array();
  for (const Pose& pose : sequence.frames) {
    nlohmann::json frame;
    frame["rootTranslation"] = {pose.root_translation.x(), pose.root_translation.y(), pose.root_translation.z()};
    frame["theta"] = nlohmann::json::array();
    for (Eigen::Index i = 0; i < pose.theta.rows(); ++i)
      frame["theta"].push_back({pose.theta(i, 0), pose.theta(i, 1), pose.theta(i, 2)});
    j["frames"].push_back(std::move(frame));
  }
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace garment
