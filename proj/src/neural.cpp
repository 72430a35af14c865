#include "garment/neural.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "garment/errors.hpp"
#include "garment/spatial.hpp"

namespace garment {

Eigen::MatrixXd Mlp::apply(const Eigen::MatrixXd& X) const {
  if (W.size() != b.size()) throw InvalidInput("mlp weight/bias layer counts differ");
  Eigen::MatrixXd H = X;
  for (std::size_t k = 0; k < W.size(); ++k) {
    if (H.cols() != W[k].rows())
      throw InvalidInput("mlp layer " + std::to_string(k) + " expects " + std::to_string(W[k].rows()) +
                         " inputs, got " + std::to_string(H.cols()));
    H = (H * W[k]).rowwise() + b[k];
    if (k + 1 < W.size()) H = H.cwiseMax(0.0);
  }
  return H;
}

Mlp load_mlp(const NeuralWeights& weights, const std::string& prefix) {
  Mlp mlp;
  for (int k = 0;; ++k) {
    const std::string base = prefix + "." + std::to_string(k);
    if (!has_tensor(weights, base + ".weight")) break;
    mlp.W.push_back(tensor_f64(weights, base + ".weight"));
    const Eigen::MatrixXd& bias = tensor_f64(weights, base + ".bias");
    mlp.b.push_back(bias.reshaped().transpose());
    if (mlp.b.back().size() != mlp.W.back().cols())
      throw InvalidInput("mlp layer " + base + " bias length does not match weight columns");
  }
  if (mlp.W.empty()) throw InvalidInput("no mlp layers found under '" + prefix + "'");
  return mlp;
}

std::vector<std::vector<int>> ball_query(const Eigen::MatrixXd& centers, const Eigen::MatrixXd& points, double radius,
                                         int max_samples) {
  if (points.rows() == 0) throw InvalidInput("ball_query: empty point set");
  if (!(radius > 0.0)) throw InvalidInput("ball_query: radius must be positive");
  if (max_samples < 1) throw InvalidInput("ball_query: maxSamples must be >= 1");

  const PointKdTree tree(points);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(centers.rows()));
  for (Eigen::Index i = 0; i < centers.rows(); ++i) {
    const Eigen::Vector3d c = centers.row(i).transpose();
    std::vector<int> hits = tree.radius(c, radius);
    if (hits.empty()) {
      out[static_cast<std::size_t>(i)] = {tree.nearest(c)};
      continue;
    }
    if (static_cast<int>(hits.size()) > max_samples) hits.resize(static_cast<std::size_t>(max_samples));
    out[static_cast<std::size_t>(i)] = std::move(hits);
  }
  return out;
}

void validate_feature_grid(const FeatureGrid& grid) {
  if (grid.levels.empty()) throw InvalidInput("feature grid has no levels");
  if (grid.radii.size() != grid.levels.size() || grid.max_samples.size() != grid.levels.size())
    throw InvalidInput("feature grid radii/maxSamples must match the level count");
  for (std::size_t l = 0; l < grid.levels.size(); ++l) {
    if (grid.levels[l].points.rows() == 0) throw InvalidInput("feature grid level " + std::to_string(l) + " is empty");
    if (grid.levels[l].features.rows() != grid.levels[l].points.rows())
      throw InvalidInput("feature grid level " + std::to_string(l) + " has mismatched feature count");
    if (!(grid.radii[l] > 0.0)) throw InvalidInput("feature grid radii must be positive");
    if (l > 0 && !(grid.radii[l] > grid.radii[l - 1]))
      throw InvalidInput("feature grid radii must be strictly increasing");
    if (grid.max_samples[l] < 1) throw InvalidInput("feature grid maxSamples must be >= 1");
  }
}

std::vector<int> farthest_point_indices(const Eigen::MatrixXd& points, int count) {
  const Eigen::Index n = points.rows();
  if (n == 0) throw InvalidInput("farthest_point_indices: empty point set");
  if (count < 1 || count > n) throw InvalidInput("farthest_point_indices: count out of range");
  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(count));
  chosen.push_back(0);
  Eigen::VectorXd dist = (points.rowwise() - points.row(0)).rowwise().squaredNorm();
  while (static_cast<int>(chosen.size()) < count) {
    Eigen::Index best = 0;
    double best_d = -1.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (dist(i) > best_d) {
        best_d = dist(i);
        best = i;
      }
    chosen.push_back(static_cast<int>(best));
    dist = dist.cwiseMin((points.rowwise() - points.row(best)).rowwise().squaredNorm());
  }
  return chosen;
}

FeatureGrid build_feature_grid(const Eigen::MatrixXd& points, const std::vector<double>& radii,
                               const std::vector<int>& max_samples, const NeuralWeights& weights) {
  if (points.rows() == 0) throw InvalidInput("build_feature_grid: empty point cloud");
  if (radii.size() != max_samples.size() || radii.empty())
    throw InvalidInput("build_feature_grid: radii and maxSamples must be non-empty and aligned");

  FeatureGrid grid;
  grid.radii = radii;
  grid.max_samples = max_samples;
  Eigen::Index keep = points.rows();
  for (std::size_t l = 0; l < radii.size(); ++l) {
    FeatureGridLevel level;
    if (keep == points.rows()) {
      level.points = points;
    } else {
      const std::vector<int> idx = farthest_point_indices(points, static_cast<int>(keep));
      level.points.resize(keep, 3);
      for (Eigen::Index i = 0; i < keep; ++i) level.points.row(i) = points.row(idx[static_cast<std::size_t>(i)]);
    }
    const Eigen::RowVector3d centroid = level.points.colwise().mean();
    const Mlp mlp = load_mlp(weights, "grid.level" + std::to_string(l) + ".mlp");
    level.features = mlp.apply(level.points.rowwise() - centroid);
    grid.levels.push_back(std::move(level));
    keep = std::max<Eigen::Index>(1, keep / 4);
  }
  validate_feature_grid(grid);
  return grid;
}

namespace {

// Shared gather/max-reduce: rows are (sample - center || sample payload).
Eigen::MatrixXd pool_level(const Eigen::MatrixXd& centers, const Eigen::MatrixXd& points,
                           const Eigen::MatrixXd& payload, double radius, int max_samples) {
  const auto neighbors = ball_query(centers, points, radius, max_samples);
  const Eigen::Index dim = 3 + payload.cols();
  Eigen::MatrixXd pooled(centers.rows(), dim);
  for (Eigen::Index i = 0; i < centers.rows(); ++i) {
    Eigen::RowVectorXd best = Eigen::RowVectorXd::Constant(dim, -std::numeric_limits<double>::infinity());
    for (int idx : neighbors[static_cast<std::size_t>(i)]) {
      Eigen::RowVectorXd row(dim);
      row.head<3>() = points.row(idx) - centers.row(i);
      row.tail(payload.cols()) = payload.row(idx);
      best = best.cwiseMax(row);
    }
    pooled.row(i) = best;
  }
  return pooled;
}

}  // namespace

Eigen::MatrixXd pool_garment_features(const Eigen::MatrixXd& proposal_vertices, const FeatureGrid& grid,
                                      const Mlp& mlp) {
  validate_feature_grid(grid);
  Eigen::Index total = 0;
  for (const FeatureGridLevel& level : grid.levels) total += 3 + level.features.cols();
  Eigen::MatrixXd gathered(proposal_vertices.rows(), total);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < grid.levels.size(); ++l) {
    const FeatureGridLevel& level = grid.levels[l];
    const Eigen::Index dim = 3 + level.features.cols();
    gathered.middleCols(at, dim) =
        pool_level(proposal_vertices, level.points, level.features, grid.radii[l], grid.max_samples[l]);
    at += dim;
  }
  return mlp.apply(gathered);
}

Eigen::MatrixXd encode_body_surface(const Eigen::MatrixXd& proposal_vertices, const Mesh& posed_body,
                                    const std::vector<double>& radii, const std::vector<int>& max_samples,
                                    const Mlp& mlp) {
  validate_mesh(posed_body);
  if (radii.size() != max_samples.size() || radii.empty())
    throw InvalidInput("encode_body_surface: radii and maxSamples must be non-empty and aligned");
  const Eigen::MatrixXd normals = vertex_normals(posed_body).N;
  Eigen::MatrixXd gathered(proposal_vertices.rows(), static_cast<Eigen::Index>(radii.size()) * 6);
  for (std::size_t l = 0; l < radii.size(); ++l) {
    gathered.middleCols(static_cast<Eigen::Index>(l) * 6, 6) =
        pool_level(proposal_vertices, posed_body.V, normals, radii[l], max_samples[l]);
  }
  return mlp.apply(gathered);
}

Eigen::MatrixXd gcn_layer(const Eigen::MatrixXd& H, const std::vector<std::vector<int>>& adjacency,
                          const Eigen::MatrixXd& W, const Eigen::RowVectorXd& B, bool relu) {
  if (static_cast<std::size_t>(H.rows()) != adjacency.size())
    throw InvalidInput("gcn_layer: adjacency size does not match feature rows");
  if (H.cols() != W.rows() || B.size() != W.cols()) throw InvalidInput("gcn_layer: weight shape mismatch");

  Eigen::MatrixXd aggregated(H.rows(), H.cols());
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    Eigen::RowVectorXd sum = H.row(i);
    for (int j : adjacency[static_cast<std::size_t>(i)]) sum += H.row(j);
    aggregated.row(i) = sum / static_cast<double>(adjacency[static_cast<std::size_t>(i)].size() + 1);
  }
  Eigen::MatrixXd out = (aggregated * W).rowwise() + B;
  if (relu) out = out.cwiseMax(0.0);
  return out;
}

AttentionWeights load_attention(const NeuralWeights& weights, const std::string& prefix) {
  AttentionWeights attn;
  attn.Wq = tensor_f64(weights, prefix + ".wq");
  attn.Wk = tensor_f64(weights, prefix + ".wk");
  attn.Wv = tensor_f64(weights, prefix + ".wv");
  attn.bq = tensor_f64(weights, prefix + ".bq").reshaped().transpose();
  attn.bk = tensor_f64(weights, prefix + ".bk").reshaped().transpose();
  attn.bv = tensor_f64(weights, prefix + ".bv").reshaped().transpose();
  if (attn.Wq.rows() != attn.Wk.rows() || attn.Wq.rows() != attn.Wv.rows() || attn.Wq.cols() != attn.Wk.cols() ||
      attn.bq.size() != attn.Wq.cols() || attn.bk.size() != attn.Wk.cols() || attn.bv.size() != attn.Wv.cols())
    throw InvalidInput("attention weight shapes under '" + prefix + "' are inconsistent");
  return attn;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

Eigen::MatrixXd temporal_attention(const Eigen::MatrixXd& F, const AttentionWeights& weights,
                                   Eigen::MatrixXd* attention) {
  if (F.rows() < 1) throw InvalidInput("temporal_attention: need at least one frame");
  if (F.cols() != weights.Wq.rows())
    throw InvalidInput("temporal_attention: feature dim " + std::to_string(F.cols()) + " does not match projections");
  const Eigen::MatrixXd Q = (F * weights.Wq).rowwise() + weights.bq;
  const Eigen::MatrixXd K = (F * weights.Wk).rowwise() + weights.bk;
  const Eigen::MatrixXd V = (F * weights.Wv).rowwise() + weights.bv;
  // The logit scale is 1/sqrt(frame count), not 1/sqrt(key dim).
  const Eigen::MatrixXd A = softmax_rows((Q * K.transpose()) / std::sqrt(static_cast<double>(F.rows())));
  if (attention) *attention = A;
  return A * V;
}

namespace {

std::vector<Eigen::Index> mlp_dims(Eigen::Index in, const std::vector<int>& hidden, int out) {
  std::vector<Eigen::Index> dims{in};
  for (int h : hidden) dims.push_back(h);
  dims.push_back(out);
  return dims;
}

void emplace_linear(NeuralWeights& weights, const std::string& base, Eigen::Index in, Eigen::Index out,
                    std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale / std::sqrt(static_cast<double>(in)));
  Eigen::MatrixXd W(in, out);
  for (Eigen::Index r = 0; r < in; ++r)
    for (Eigen::Index c = 0; c < out; ++c) W(r, c) = dist(rng);
  Eigen::MatrixXd b(out, 1);
  for (Eigen::Index c = 0; c < out; ++c) b(c, 0) = dist(rng);
  weights.emplace(base + ".weight", Tensor::from(W));
  weights.emplace(base + ".bias", Tensor::from(b));
}

void emplace_mlp(NeuralWeights& weights, const std::string& prefix, const std::vector<Eigen::Index>& dims,
                 std::mt19937_64& rng) {
  for (std::size_t k = 0; k + 1 < dims.size(); ++k)
    emplace_linear(weights, prefix + "." + std::to_string(k), dims[k], dims[k + 1], rng);
}

struct RefinerDims {
  Eigen::Index pool_in, body_in, gcn_in, penultimate;
};

RefinerDims refiner_dims(const RefinerConfig& config) {
  if (config.iterations < 1) throw InvalidInput("refiner iterations must be >= 1");
  if (config.radii.size() != config.max_samples.size() || config.radii.empty())
    throw InvalidInput("refiner radii and maxSamples must be non-empty and aligned");
  if (config.gcn_hidden.empty()) throw InvalidInput("refiner needs at least one hidden gcn layer");
  RefinerDims dims;
  const Eigen::Index levels = static_cast<Eigen::Index>(config.radii.size());
  dims.pool_in = levels * (3 + config.grid_feature_dim);
  dims.body_in = levels * 6;
  dims.gcn_in = 3 + config.pool_feature_dim + config.body_feature_dim + config.attention_dim;
  dims.penultimate = config.gcn_hidden.back();
  return dims;
}

void check_shape(const NeuralWeights& weights, const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  const Eigen::MatrixXd& t = tensor_f64(weights, name);
  if (t.rows() != rows || (cols >= 0 && t.cols() != cols))
    throw InvalidInput("weight '" + name + "' has shape " + std::to_string(t.rows()) + "x" +
                       std::to_string(t.cols()) + ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
}

}  // namespace

NeuralWeights init_refiner_weights(const RefinerConfig& config, std::uint64_t seed) {
  const RefinerDims dims = refiner_dims(config);
  std::mt19937_64 rng(seed);
  NeuralWeights weights;
  for (std::size_t l = 0; l < config.radii.size(); ++l)
    emplace_mlp(weights, "grid.level" + std::to_string(l) + ".mlp",
                mlp_dims(3, config.grid_mlp_hidden, config.grid_feature_dim), rng);
  for (int j = 1; j <= config.iterations; ++j) {
    const std::string iter = "iter" + std::to_string(j);
    emplace_mlp(weights, iter + ".pool.mlp", mlp_dims(dims.pool_in, config.pool_mlp_hidden, config.pool_feature_dim),
                rng);
    emplace_mlp(weights, iter + ".body.mlp", mlp_dims(dims.body_in, config.body_mlp_hidden, config.body_feature_dim),
                rng);
    // Small gain on the displacement head keeps the untrained residual modest.
    std::vector<Eigen::Index> gcn = mlp_dims(dims.gcn_in, config.gcn_hidden, 3);
    for (std::size_t l = 0; l + 1 < gcn.size(); ++l) {
      const double scale = (l + 2 == gcn.size()) ? 0.01 : 1.0;
      emplace_linear(weights, iter + ".gcn." + std::to_string(l), gcn[l], gcn[l + 1], rng, scale);
    }
    if (j >= 2) {
      std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(dims.penultimate)));
      auto proj = [&](const std::string& suffix, Eigen::Index out) {
        Eigen::MatrixXd W(dims.penultimate, out);
        for (Eigen::Index r = 0; r < W.rows(); ++r)
          for (Eigen::Index c = 0; c < out; ++c) W(r, c) = dist(rng);
        Eigen::MatrixXd b(out, 1);
        for (Eigen::Index c = 0; c < out; ++c) b(c, 0) = dist(rng);
        weights.emplace(iter + ".attn.w" + suffix, Tensor::from(W));
        weights.emplace(iter + ".attn.b" + suffix, Tensor::from(b));
      };
      proj("q", config.attention_dim);
      proj("k", config.attention_dim);
      proj("v", config.attention_dim);
    }
  }
  return weights;
}

void validate_refiner_weights(const RefinerConfig& config, const NeuralWeights& weights) {
  const RefinerDims dims = refiner_dims(config);
  for (std::size_t l = 0; l < config.radii.size(); ++l) {
    const Mlp mlp = load_mlp(weights, "grid.level" + std::to_string(l) + ".mlp");
    if (mlp.W.front().rows() != 3 || mlp.W.back().cols() != config.grid_feature_dim)
      throw InvalidInput("grid mlp level " + std::to_string(l) + " has wrong outer dims");
  }
  for (int j = 1; j <= config.iterations; ++j) {
    const std::string iter = "iter" + std::to_string(j);
    const Mlp pool = load_mlp(weights, iter + ".pool.mlp");
    if (pool.W.front().rows() != dims.pool_in || pool.W.back().cols() != config.pool_feature_dim)
      throw InvalidInput(iter + ".pool.mlp has wrong outer dims");
    const Mlp body = load_mlp(weights, iter + ".body.mlp");
    if (body.W.front().rows() != dims.body_in || body.W.back().cols() != config.body_feature_dim)
      throw InvalidInput(iter + ".body.mlp has wrong outer dims");
    std::vector<Eigen::Index> gcn = mlp_dims(dims.gcn_in, config.gcn_hidden, 3);
    for (std::size_t l = 0; l + 1 < gcn.size(); ++l) {
      const std::string base = iter + ".gcn." + std::to_string(l);
      check_shape(weights, base + ".weight", gcn[l], gcn[l + 1]);
      check_shape(weights, base + ".bias", gcn[l + 1], 1);
    }
    if (j >= 2) {
      const AttentionWeights attn = load_attention(weights, iter + ".attn");
      if (attn.Wq.rows() != dims.penultimate || attn.Wv.cols() != config.attention_dim)
        throw InvalidInput(iter + ".attn has wrong dims");
    }
  }
}

RefineResult iterative_refine(const std::vector<Mesh>& proposals, const std::vector<FeatureGrid>& grids,
                              const std::vector<Mesh>& posed_bodies, const NeuralWeights& weights,
                              const RefinerConfig& config) {
  if (proposals.empty()) throw InvalidInput("iterative_refine: empty proposal sequence");
  if (grids.size() != proposals.size() || posed_bodies.size() != proposals.size())
    throw InvalidInput("iterative_refine: per-frame inputs are not aligned");
  for (std::size_t t = 1; t < proposals.size(); ++t)
    if (!same_topology(proposals[0], proposals[t]))
      throw InvalidInput("iterative_refine: proposal frames change topology");
  validate_refiner_weights(config, weights);

  const RefinerDims dims = refiner_dims(config);
  const Eigen::Index frames = static_cast<Eigen::Index>(proposals.size());
  const Eigen::Index n = proposals[0].V.rows();
  const std::vector<std::vector<int>> adjacency = vertex_adjacency(proposals[0]);

  RefineResult result;
  result.refined = proposals;
  // Penultimate GCN features of the previous iteration, one matrix per frame.
  std::vector<Eigen::MatrixXd> penultimate;

  for (int j = 1; j <= config.iterations; ++j) {
    const std::string iter = "iter" + std::to_string(j);
    const Mlp pool_mlp = load_mlp(weights, iter + ".pool.mlp");
    const Mlp body_mlp = load_mlp(weights, iter + ".body.mlp");
    const Mlp gcn = load_mlp(weights, iter + ".gcn");

    // Temporal fusion runs per vertex over the frame axis.
    std::vector<Eigen::MatrixXd> attended(static_cast<std::size_t>(frames),
                                          Eigen::MatrixXd::Zero(n, config.attention_dim));
    if (j >= 2) {
      const AttentionWeights attn = load_attention(weights, iter + ".attn");
      Eigen::MatrixXd history(frames, dims.penultimate);
      for (Eigen::Index v = 0; v < n; ++v) {
        for (Eigen::Index t = 0; t < frames; ++t) history.row(t) = penultimate[static_cast<std::size_t>(t)].row(v);
        const Eigen::MatrixXd fused = temporal_attention(history, attn);
        for (Eigen::Index t = 0; t < frames; ++t) attended[static_cast<std::size_t>(t)].row(v) = fused.row(t);
      }
    }

    std::vector<Eigen::MatrixXd> next_penultimate(static_cast<std::size_t>(frames));
    for (Eigen::Index t = 0; t < frames; ++t) {
      const Eigen::MatrixXd& cur = result.refined[static_cast<std::size_t>(t)].V;
      Eigen::MatrixXd X(n, dims.gcn_in);
      X.leftCols<3>() = cur;
      Eigen::Index at = 3;
      X.middleCols(at, config.pool_feature_dim) =
          pool_garment_features(cur, grids[static_cast<std::size_t>(t)], pool_mlp);
      at += config.pool_feature_dim;
      X.middleCols(at, config.body_feature_dim) =
          encode_body_surface(cur, posed_bodies[static_cast<std::size_t>(t)], config.radii, config.max_samples,
                              body_mlp);
      at += config.body_feature_dim;
      X.middleCols(at, config.attention_dim) = attended[static_cast<std::size_t>(t)];

      Eigen::MatrixXd H = X;
      for (std::size_t l = 0; l + 1 < gcn.W.size(); ++l) {
        H = gcn_layer(H, adjacency, gcn.W[l], gcn.b[l], true);
        if (l + 2 == gcn.W.size()) next_penultimate[static_cast<std::size_t>(t)] = H;
      }
      const Eigen::MatrixXd D = gcn_layer(H, adjacency, gcn.W.back(), gcn.b.back(), false);
      if (!D.allFinite()) throw NumericalError("iterative_refine: non-finite displacement at iteration " +
                                               std::to_string(j) + ", frame " + std::to_string(t));
      result.refined[static_cast<std::size_t>(t)].V += D;
      if (result.displacements.size() < static_cast<std::size_t>(j)) result.displacements.emplace_back();
      result.displacements.back().push_back(D);
    }
    penultimate = std::move(next_penultimate);
  }
  return result;
}

}  // namespace garment
