#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "garment/mesh.hpp"

namespace garment {

struct SequenceMetrics {
  std::optional<double> canonical_l2_mm;       // M1, when a canonical pair is supplied
  double posed_l2_mm = 0.0;                    // M2
  std::optional<double> acceleration_error;    // M3 in m/s^2 (needs >= 3 frames)
  std::optional<double> one_way_chamfer_mm;    // vs input clouds, when supplied
  std::vector<double> per_frame_l2_mm;         // M2 per frame
  std::vector<double> per_frame_chamfer_mm;    // when clouds supplied
};

// Mean per-vertex Euclidean distance between topology-aligned meshes, in mm.
double canonical_l2_mm(const Mesh& pred, const Mesh& gt);

// M2 and M3 over aligned sequences. M3 compares central second differences
// a_t = (x_{t+1} - 2 x_t + x_{t-1}) * fps^2 on interior frames and is omitted
// (not an error) below 3 frames.
SequenceMetrics evaluate_sequence(const std::vector<Mesh>& pred, const std::vector<Mesh>& gt, double fps);

// Mean over reconstruction vertices of the Euclidean distance (not squared)
// to the nearest cloud point, in mm.
double one_way_chamfer(const Mesh& reconstruction, const Eigen::MatrixXd& cloud);

void save_metrics(const std::filesystem::path& path, const SequenceMetrics& metrics);

}  // namespace garment
