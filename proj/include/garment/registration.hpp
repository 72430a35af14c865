#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "garment/boundary.hpp"
#include "garment/mesh.hpp"

namespace garment {

// Scalar loss value plus its gradient with respect to the first argument's
// point coordinates.
struct LossGrad {
  double value = 0.0;
  Eigen::MatrixXd grad;  // same shape as the differentiated point matrix
};

// Symmetric squared-distance Chamfer between point sets A and B:
//   mean_a min_b |a-b|^2 + mean_b min_a |b-a|^2.
// Gradient is with respect to A (B held fixed) and includes the B->A
// nearest-match terms. Nearest-neighbor ties resolve to the lowest index.
LossGrad chamfer_loss(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

enum class EdgeLossMode {
  RestLength,      // penalize deviation from captured rest lengths
  AbsoluteLength,  // penalize edge length itself
};

// mean over edges of (|e| - rest)^2 (RestLength) or |e|^2 (AbsoluteLength).
LossGrad edge_length_loss(const Eigen::MatrixXd& V, const std::vector<std::array<int, 2>>& edges,
                          const Eigen::VectorXd& rest_lengths,
                          EdgeLossMode mode = EdgeLossMode::RestLength);

// mean over interior edges of (1 - cos angle(n_f0, n_f1)).
// Throws NumericalError on a zero-area face.
LossGrad normal_consistency_loss(const Eigen::MatrixXd& V, const Eigen::MatrixXi& F);

// mean over label pairs of the symmetric squared Chamfer between the two
// loops' vertex sets; gradient w.r.t. the source vertex matrix.
LossGrad boundary_chamfer_loss(const Eigen::MatrixXd& sourceV,
                               const std::vector<BoundaryLoop>& sourceLoops,
                               const Eigen::MatrixXd& targetV,
                               const std::vector<BoundaryLoop>& targetLoops,
                               const std::vector<std::pair<std::string, std::string>>& pairs);

struct RegistrationConfig {
  double lambda_chamfer = 1.0;
  double lambda_edge = 10.0;
  double lambda_normal = 0.1;
  double lambda_boundary = 1.0;
  double step_size = 1e-3;
  int max_iterations = 2000;
  double convergence_tol = 1e-6;  // relative change of total loss
  int chamfer_samples = 0;        // 0 = use all vertices
  EdgeLossMode edge_mode = EdgeLossMode::RestLength;
  std::uint64_t seed = 0;  // drives Chamfer subsampling only
  std::vector<std::pair<std::string, std::string>> boundary_pairs;  // (source, target) labels
};

struct IterationLosses {
  double chamfer = 0.0;
  double edge = 0.0;
  double normal = 0.0;
  double boundary = 0.0;
  double total = 0.0;
};

struct RegistrationReport {
  std::vector<IterationLosses> trace;  // accepted iterations, element 0 is the initial state
  Eigen::MatrixXd final_vertices;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;
  std::string message;
};

// Boundary-aware registration: deforms `source` vertex positions toward
// `target` by first-order descent with adaptive per-coordinate moments and a
// halve-on-increase line search. Topology is never modified. A non-finite
// loss aborts with diverged = true.
RegistrationReport register_mesh(const Mesh& source, const std::vector<BoundaryLoop>& sourceLoops,
                                 const Mesh& target, const std::vector<BoundaryLoop>& targetLoops,
                                 const RegistrationConfig& cfg);

}  // namespace garment
