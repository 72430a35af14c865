#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "garment/mesh.hpp"
#include "garment/tensor_file.hpp"

namespace garment {

// Named weight store. Linear layers keep weights as (in x out) matrices and
// act on row vectors: y = x W + b.
using NeuralWeights = TensorMap;

// Plain MLP: every layer but the last is followed by ReLU. An MLP with no
// layers is the identity.
struct Mlp {
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::RowVectorXd> b;

  // Applies the MLP to each row of X.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
};

// Loads layers "<prefix>.0.weight", "<prefix>.0.bias", "<prefix>.1.weight", ...
// until the next index is absent. Throws InvalidInput if no layer exists.
Mlp load_mlp(const NeuralWeights& weights, const std::string& prefix);

// Per-center neighbor indices: up to max_samples point indices within
// `radius`, ordered by ascending (distance, index). A center with an empty
// ball gets exactly its single global nearest point.
std::vector<std::vector<int>> ball_query(const Eigen::MatrixXd& centers, const Eigen::MatrixXd& points, double radius,
                                         int max_samples);

// Hierarchy of downsampled point clouds with per-point features.
struct FeatureGridLevel {
  Eigen::MatrixXd points;    // n_l x 3
  Eigen::MatrixXd features;  // n_l x f_l
};
struct FeatureGrid {
  std::vector<FeatureGridLevel> levels;
  std::vector<double> radii;       // strictly increasing, one per level
  std::vector<int> max_samples;    // one per level
};
void validate_feature_grid(const FeatureGrid& grid);

// Farthest-point downsampling: starts at index 0, greedily adds the point
// farthest from the chosen set (lowest index on ties). Returns `count`
// indices in selection order.
std::vector<int> farthest_point_indices(const Eigen::MatrixXd& points, int count);

// Builds the pooling hierarchy from a raw point cloud. Level l keeps
// max(1, n / 4^l) farthest-point samples; its features are
// mlp(point - level centroid), so the grid is translation invariant.
// The per-level MLPs are "grid.level<l>.mlp.*" in `weights`.
FeatureGrid build_feature_grid(const Eigen::MatrixXd& points, const std::vector<double>& radii,
                               const std::vector<int>& max_samples, const NeuralWeights& weights);

// Per-vertex pooled features: for each level, ball_query around the vertex,
// gather rows (point - vertex || point feature), take the elementwise max
// over samples, concatenate levels, and apply `mlp`.
Eigen::MatrixXd pool_garment_features(const Eigen::MatrixXd& proposal_vertices, const FeatureGrid& grid,
                                      const Mlp& mlp);

// Same gather/reduce scheme over the posed body: samples carry
// (body vertex - garment vertex || body vertex normal).
Eigen::MatrixXd encode_body_surface(const Eigen::MatrixXd& proposal_vertices, const Mesh& posed_body,
                                    const std::vector<double>& radii, const std::vector<int>& max_samples,
                                    const Mlp& mlp);

// One graph-convolution step on the bidirectional mesh graph with
// self-connections: out = act(Dbar^-1 Abar H W + B), Abar = A + I,
// Dbar = diag(row sums of Abar). `relu` selects the activation (identity
// when false, used by displacement output layers).
Eigen::MatrixXd gcn_layer(const Eigen::MatrixXd& H, const std::vector<std::vector<int>>& adjacency,
                          const Eigen::MatrixXd& W, const Eigen::RowVectorXd& B, bool relu = true);

struct AttentionWeights {
  Eigen::MatrixXd Wq, Wk, Wv;
  Eigen::RowVectorXd bq, bk, bv;
};
AttentionWeights load_attention(const NeuralWeights& weights, const std::string& prefix);

// Row-wise softmax with max-subtraction; every output row sums to 1 and the
// result is invariant to adding a constant to all entries of a row.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

// Scaled dot-product self-attention over the frame axis. F holds one feature
// row per frame; logits are scaled by 1/sqrt(frameCount) and softmaxed over
// the key axis. Returns the fused values (frameCount x valueDim); `attention`
// (optional) receives the softmaxed frame-by-frame matrix.
Eigen::MatrixXd temporal_attention(const Eigen::MatrixXd& F, const AttentionWeights& weights,
                                   Eigen::MatrixXd* attention = nullptr);

struct RefinerConfig {
  int iterations = 3;
  std::vector<double> radii = {0.05, 0.1, 0.2};
  std::vector<int> max_samples = {16, 32, 64};
  int grid_feature_dim = 8;
  std::vector<int> grid_mlp_hidden = {16};
  std::vector<int> pool_mlp_hidden = {32};
  int pool_feature_dim = 16;
  std::vector<int> body_mlp_hidden = {32};
  int body_feature_dim = 16;
  std::vector<int> gcn_hidden = {64, 32};  // last entry is the penultimate width
  int attention_dim = 8;
};

// Random N(0, 1/sqrt(fan_in)) weights for every block the refiner needs,
// seeded deterministically. Layout:
//   grid.level<l>.mlp.<k>.{weight,bias}
//   iter<j>.pool.mlp.<k>.{weight,bias}     j in [1, iterations]
//   iter<j>.body.mlp.<k>.{weight,bias}
//   iter<j>.gcn.<l>.{weight,bias}          final layer emits 3 channels
//   iter<j>.attn.{wq,bq,wk,bk,wv,bv}       j >= 2
NeuralWeights init_refiner_weights(const RefinerConfig& config, std::uint64_t seed);

// Checks that `weights` contains every block of `config` with consistent
// shapes; throws InvalidInput otherwise.
void validate_refiner_weights(const RefinerConfig& config, const NeuralWeights& weights);

struct RefineResult {
  std::vector<Mesh> refined;                            // per frame
  std::vector<std::vector<Eigen::MatrixXd>> displacements;  // [iteration][frame]
};

// Iterative displacement prediction. Per iteration j, each frame's current
// vertices are featurized (coordinates || pooled grid features ||
// body-surface features || per-vertex temporal attention over iteration
// j-1's penultimate features, zeros when j = 1), run through the GCN stack,
// and the final linear graph layer emits a displacement that accumulates
// onto the proposal. Connectivity never changes. Throws NumericalError on
// non-finite displacements.
RefineResult iterative_refine(const std::vector<Mesh>& proposals, const std::vector<FeatureGrid>& grids,
                              const std::vector<Mesh>& posed_bodies, const NeuralWeights& weights,
                              const RefinerConfig& config);

}  // namespace garment
