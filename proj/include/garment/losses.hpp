#pragma once

#include <vector>

#include <Eigen/Dense>

#include "garment/laplacian.hpp"
#include "garment/mesh.hpp"

namespace garment {

struct LossWeights {
  // Canonical terms: segmentation CE, coefficient L2, canonical vertex L2,
  // interpenetration, Laplacian regularization.
  double ce = 1.0;
  double alpha_l2 = 1.0;
  double canonical_vertex_l2 = 1.0;
  double canonical_interpenetration = 1.0;
  double canonical_laplacian = 1.0;
  // Posed terms: vertex L2, interpenetration, Laplacian regularization,
  // temporal constraint.
  double posed_vertex_l2 = 1.0;
  double posed_interpenetration = 1.0;
  double posed_laplacian = 1.0;
  double temporal = 1.0;
  // Per-refinement-iteration aggregation weights w_j.
  std::vector<double> iteration_weights = {1.0, 1.0, 1.0};
};
void validate_loss_weights(const LossWeights& weights);

// Mean of -log p[label] with probabilities clamped to [1e-12, 1]. Each row of
// `probabilities` must sum to 1 within 1e-6.
double cross_entropy(const Eigen::MatrixXd& probabilities, const std::vector<int>& labels);

// Mean over garment vertices of ReLU(-N_hi . (T_i - V_hi)) where V_hi/N_hi
// are the nearest body vertex's position and unit normal. Positive values
// measure penetration depth along the body normal.
double interpenetration_loss(const Mesh& garment, const Mesh& body);

// Mean over vertices of (|(L pred)_i| - |(L gt)_i|), signed as a difference
// of per-vertex Laplacian norms. `clamp_negative` replaces negative totals
// with 0 for training-style use.
double laplacian_regularization(const Mesh& pred, const Mesh& gt, const LaplacianOperator& L,
                                bool clamp_negative = false);

// (1/(T-1)) sum over consecutive frames of the mean squared per-vertex
// displacement.
double temporal_constraint(const std::vector<Mesh>& sequence);

struct LossBreakdown {
  std::vector<double> terms;    // unweighted term values
  std::vector<double> weights;  // matching weights
  double total = 0.0;           // exact dot product of terms and weights
};

struct CanonicalLossInputs {
  Eigen::MatrixXd segmentation_probabilities;  // per-point class distributions
  std::vector<int> segmentation_labels;
  Eigen::VectorXd alpha_pred;
  Eigen::VectorXd alpha_gt;
  Mesh canonical_pred;
  Mesh canonical_gt;
  Mesh body;  // canonical-pose body for the interpenetration term
};

// Weighted sum of CE, |alpha' - alpha_gt|^2, mean per-vertex squared error,
// interpenetration, and Laplacian regularization (cotangent L built on the
// ground-truth canonical garment).
LossBreakdown canonical_loss(const CanonicalLossInputs& inputs, const LossWeights& weights);

struct PosedLossInputs {
  std::vector<Mesh> pred;    // one per frame
  std::vector<Mesh> gt;      // aligned
  std::vector<Mesh> bodies;  // posed bodies, aligned
};

// Per-iteration posed loss: vertex L2, interpenetration and Laplacian
// regularization averaged over frames, plus the temporal constraint.
LossBreakdown posed_loss(const PosedLossInputs& inputs, const LossWeights& weights);

// sum_j w_j * loss_j over refinement iterations.
double aggregate_posed_loss(const std::vector<LossBreakdown>& per_iteration, const std::vector<double>& w);

}  // namespace garment
