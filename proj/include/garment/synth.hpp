#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "garment/mesh.hpp"
#include "garment/neural.hpp"
#include "garment/skeleton.hpp"

namespace garment {

struct SynthConfig {
  std::uint64_t seed = 7;
  int frames = 8;
  int points_per_frame = 2000;
  double incompleteness = 0.0;     // fraction of cloud points removed, [0, 1)
  double label_error_rate = 0.0;   // fraction of labels flipped, [0, 1)
  double fps = 30.0;
  int variants = 12;               // canonical garments for shape-space fitting
  double swing_amplitude = 0.35;   // hip swing, radians
};

// Desk-scale test scene: a two-leg body (capped capsules + pelvis block) with
// a three-joint skeleton, a coarse tube-skirt template, a finer tube-skirt
// source garment animated by a sinusoidal hip swing, labeled surface point
// clouds per frame, and a family of canonical skirt variants sharing the
// template topology.
struct SyntheticScene {
  Skeleton skeleton;
  Mesh template_garment;
  std::vector<std::pair<std::string, std::vector<int>>> template_labels;  // label -> loop seeds
  Mesh source_garment;  // rest pose, its own (finer) topology
  std::vector<std::pair<std::string, std::vector<int>>> source_labels;
  PoseSequence poses;                      // frame 0 is the rest pose
  std::vector<Mesh> source_frames;         // posed source garment
  std::vector<Mesh> posed_bodies;
  std::vector<Eigen::MatrixXd> cloud_points;   // per frame, n x 3
  std::vector<std::vector<int>> cloud_labels;  // 0 = body, 1 = garment
  std::vector<Mesh> variants;              // template topology
};

// Open cylinder with `segments` vertices per ring and `rings` rings from
// waist (ring 0) to hem (last ring); radius interpolates linearly in height.
Mesh make_tube_skirt(int segments, int rings, double waist_y, double hem_y, double waist_radius, double hem_radius);

// Area-weighted uniform surface samples.
Eigen::MatrixXd sample_mesh_surface(const Mesh& mesh, int count, std::mt19937_64& rng);

SyntheticScene build_synthetic_scene(const SynthConfig& config);

// Writes every scene artifact under `dir`:
//   skeleton.json + body.obj + body_weights.bin
//   template.obj, template_boundaries.json
//   source/frame_%04d.obj, source_boundaries.json
//   poses.json
//   body_posed/frame_%04d.obj
//   clouds/frame_%04d.txt           ("x y z label" lines)
//   variants/variant_%02d.obj
//   refiner_weights.bin             (seeded random weights shaped for `refiner`)
void write_synthetic_scene(const std::filesystem::path& dir, const SyntheticScene& scene,
                           const RefinerConfig& refiner, std::uint64_t seed);

// Point cloud text I/O: one "x y z label" line per point.
void save_point_cloud(const std::filesystem::path& path, const Eigen::MatrixXd& points,
                      const std::vector<int>& labels);
std::pair<Eigen::MatrixXd, std::vector<int>> load_point_cloud(const std::filesystem::path& path);

// Rows of `points` whose label equals `label`.
Eigen::MatrixXd select_labeled_points(const Eigen::MatrixXd& points, const std::vector<int>& labels, int label);

std::string frame_file_name(int index);    // "frame_0007.obj"
std::string cloud_file_name(int index);    // "frame_0007.txt"
std::string variant_file_name(int index);  // "variant_03.obj"

}  // namespace garment
