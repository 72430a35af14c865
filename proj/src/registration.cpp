#include "garment/registration.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "garment/errors.hpp"
#include "garment/spatial.hpp"

namespace garment {

LossGrad chamfer_loss(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.rows() == 0 || B.rows() == 0) throw InvalidInput("Chamfer distance over an empty set");
  LossGrad out;
  out.grad = Eigen::MatrixXd::Zero(A.rows(), 3);
  const PointKdTree tree_b(B), tree_a(A);
  const double inv_na = 1.0 / static_cast<double>(A.rows());
  const double inv_nb = 1.0 / static_cast<double>(B.rows());

  for (int i = 0; i < A.rows(); ++i) {
    const int j = tree_b.nearest(A.row(i).transpose());
    const Eigen::RowVector3d d = A.row(i) - B.row(j);
    out.value += inv_na * d.squaredNorm();
    out.grad.row(i) += 2.0 * inv_na * d;
  }
  for (int j = 0; j < B.rows(); ++j) {
    const int i = tree_a.nearest(B.row(j).transpose());
    const Eigen::RowVector3d d = B.row(j) - A.row(i);
    out.value += inv_nb * d.squaredNorm();
    out.grad.row(i) -= 2.0 * inv_nb * d;
  }
  return out;
}

LossGrad edge_length_loss(const Eigen::MatrixXd& V, const std::vector<std::array<int, 2>>& edges,
                          const Eigen::VectorXd& rest_lengths, EdgeLossMode mode) {
  LossGrad out;
  out.grad = Eigen::MatrixXd::Zero(V.rows(), 3);
  if (edges.empty()) return out;
  if (mode == EdgeLossMode::RestLength &&
      rest_lengths.size() != static_cast<Eigen::Index>(edges.size()))
    throw InvalidInput("rest length count does not match edge count");

  const double inv_e = 1.0 / static_cast<double>(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const int i = edges[k][0], j = edges[k][1];
    const Eigen::RowVector3d e = V.row(i) - V.row(j);
    const double len = e.norm();
    const double rest = mode == EdgeLossMode::RestLength ? rest_lengths[k] : 0.0;
    out.value += inv_e * (len - rest) * (len - rest);
    if (len > 0.0) {
      const Eigen::RowVector3d g = 2.0 * inv_e * (len - rest) / len * e;
      out.grad.row(i) += g;
      out.grad.row(j) -= g;
    }
  }
  return out;
}

LossGrad normal_consistency_loss(const Eigen::MatrixXd& V, const Eigen::MatrixXi& F) {
  Mesh mesh{V, F};
  const auto interior = interior_edges(mesh);
  if (interior.empty()) throw InvalidInput("normal consistency needs at least one interior edge");

  // Unnormalized face normals and their lengths.
  const int nf = static_cast<int>(F.rows());
  Eigen::MatrixXd N(nf, 3);
  Eigen::VectorXd len(nf);
  for (int f = 0; f < nf; ++f) {
    const Eigen::Vector3d a = V.row(F(f, 0)), b = V.row(F(f, 1)), c = V.row(F(f, 2));
    const Eigen::Vector3d n = (b - a).cross(c - a);
    N.row(f) = n;
    len[f] = n.norm();
    if (len[f] <= 1e-30)
      throw NumericalError("zero-area face " + std::to_string(f) + " in normal consistency loss");
  }

  LossGrad out;
  out.grad = Eigen::MatrixXd::Zero(V.rows(), 3);
  const double inv_e = 1.0 / static_cast<double>(interior.size());

  // d(1 - n0.n1)/dp: with N linear in each vertex (dN = dp x e_opposite),
  // the per-face contribution is q x e_opposite, q = (I - n n^T) n_other / |N|.
  auto accumulate = [&](int f, const Eigen::Vector3d& n_other) {
    const Eigen::Vector3d n = N.row(f).transpose() / len[f];
    const Eigen::Vector3d q = (n_other - n * n.dot(n_other)) / len[f];
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d e_opp =
          V.row(F(f, (k + 1) % 3)) - V.row(F(f, (k + 2) % 3));
      out.grad.row(F(f, k)) += inv_e * q.cross(e_opp).transpose();
    }
  };

  for (const auto& e : interior) {
    const Eigen::Vector3d n0 = N.row(e.f0).transpose() / len[e.f0];
    const Eigen::Vector3d n1 = N.row(e.f1).transpose() / len[e.f1];
    out.value += inv_e * (1.0 - n0.dot(n1));
    accumulate(e.f0, n1);
    accumulate(e.f1, n0);
  }
  return out;
}

LossGrad boundary_chamfer_loss(const Eigen::MatrixXd& sourceV,
                               const std::vector<BoundaryLoop>& sourceLoops,
                               const Eigen::MatrixXd& targetV,
                               const std::vector<BoundaryLoop>& targetLoops,
                               const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) throw InvalidInput("boundary Chamfer needs at least one label pair");
  LossGrad out;
  out.grad = Eigen::MatrixXd::Zero(sourceV.rows(), 3);
  const double inv_pairs = 1.0 / static_cast<double>(pairs.size());

  for (const auto& [src_label, tgt_label] : pairs) {
    const BoundaryLoop& sl = find_loop(sourceLoops, src_label);
    const BoundaryLoop& tl = find_loop(targetLoops, tgt_label);
    Eigen::MatrixXd S(sl.vertices.size(), 3), T(tl.vertices.size(), 3);
    for (std::size_t i = 0; i < sl.vertices.size(); ++i) S.row(i) = sourceV.row(sl.vertices[i]);
    for (std::size_t i = 0; i < tl.vertices.size(); ++i) T.row(i) = targetV.row(tl.vertices[i]);

    const LossGrad pair_loss = chamfer_loss(S, T);
    out.value += inv_pairs * pair_loss.value;
    for (std::size_t i = 0; i < sl.vertices.size(); ++i)
      out.grad.row(sl.vertices[i]) += inv_pairs * pair_loss.grad.row(i);
  }
  return out;
}

namespace {

void validate_config(const RegistrationConfig& cfg) {
  const double lambdas[4] = {cfg.lambda_chamfer, cfg.lambda_edge, cfg.lambda_normal,
                             cfg.lambda_boundary};
  double sum = 0.0;
  for (double l : lambdas) {
    if (l < 0.0) throw InvalidInput("registration loss weights must be nonnegative");
    sum += l;
  }
  if (sum <= 0.0) throw InvalidInput("at least one registration loss weight must be positive");
  if (cfg.step_size <= 0.0) throw InvalidInput("step size must be positive");
  if (cfg.max_iterations < 1) throw InvalidInput("max iterations must be positive");
  if (cfg.convergence_tol <= 0.0) throw InvalidInput("convergence tolerance must be positive");
  if (cfg.chamfer_samples < 0) throw InvalidInput("chamfer sample count must be nonnegative");
}

std::vector<int> sample_indices(int n, int count, std::mt19937_64& rng) {
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  if (count <= 0 || count >= n) return all;
  std::vector<int> picked;
  picked.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
  return picked;
}

}  // namespace

RegistrationReport register_mesh(const Mesh& source, const std::vector<BoundaryLoop>& sourceLoops,
                                 const Mesh& target, const std::vector<BoundaryLoop>& targetLoops,
                                 const RegistrationConfig& cfg) {
  validate_mesh(source);
  validate_mesh(target);
  validate_config(cfg);
  for (const auto& [s, t] : cfg.boundary_pairs) {
    find_loop(sourceLoops, s);
    find_loop(targetLoops, t);
  }

  const auto edges = mesh_edges(source);
  const Eigen::VectorXd rest = edge_lengths(source);
  const bool use_boundary = cfg.lambda_boundary > 0.0 && !cfg.boundary_pairs.empty();
  std::mt19937_64 rng(cfg.seed);

  struct Eval {
    IterationLosses losses;
    Eigen::MatrixXd grad;
  };
  // Chamfer subsamples are fixed per iteration so the line search compares
  // like against like.
  std::vector<int> src_sample, tgt_sample;
  auto resample = [&]() {
    src_sample = sample_indices(source.vertex_count(), cfg.chamfer_samples, rng);
    tgt_sample = sample_indices(target.vertex_count(), cfg.chamfer_samples, rng);
  };

  auto evaluate = [&](const Eigen::MatrixXd& V, bool need_grad) -> Eval {
    Eval ev;
    ev.losses = {};
    if (need_grad) ev.grad = Eigen::MatrixXd::Zero(V.rows(), 3);
    if (cfg.lambda_chamfer > 0.0) {
      Eigen::MatrixXd A(src_sample.size(), 3), B(tgt_sample.size(), 3);
      for (std::size_t i = 0; i < src_sample.size(); ++i) A.row(i) = V.row(src_sample[i]);
      for (std::size_t i = 0; i < tgt_sample.size(); ++i) B.row(i) = target.V.row(tgt_sample[i]);
      const LossGrad cd = chamfer_loss(A, B);
      ev.losses.chamfer = cd.value;
      if (need_grad)
        for (std::size_t i = 0; i < src_sample.size(); ++i)
          ev.grad.row(src_sample[i]) += cfg.lambda_chamfer * cd.grad.row(i);
    }
    if (cfg.lambda_edge > 0.0) {
      const LossGrad el = edge_length_loss(V, edges, rest, cfg.edge_mode);
      ev.losses.edge = el.value;
      if (need_grad) ev.grad += cfg.lambda_edge * el.grad;
    }
    if (cfg.lambda_normal > 0.0) {
      const LossGrad nc = normal_consistency_loss(V, source.F);
      ev.losses.normal = nc.value;
      if (need_grad) ev.grad += cfg.lambda_normal * nc.grad;
    }
    if (use_boundary) {
      const LossGrad bc =
          boundary_chamfer_loss(V, sourceLoops, target.V, targetLoops, cfg.boundary_pairs);
      ev.losses.boundary = bc.value;
      if (need_grad) ev.grad += cfg.lambda_boundary * bc.grad;
    }
    ev.losses.total = cfg.lambda_chamfer * ev.losses.chamfer + cfg.lambda_edge * ev.losses.edge +
                      cfg.lambda_normal * ev.losses.normal +
                      cfg.lambda_boundary * ev.losses.boundary;
    return ev;
  };

  RegistrationReport report;
  Eigen::MatrixXd V = source.V;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(V.rows(), 3);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(V.rows(), 3);
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  resample();
  Eval cur = evaluate(V, true);
  report.trace.push_back(cur.losses);
  if (!std::isfinite(cur.losses.total)) {
    report.final_vertices = V;
    report.diverged = true;
    report.message = "initial loss is not finite";
    return report;
  }

  int adam_t = 0;
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    if (!cur.grad.allFinite()) {
      report.diverged = true;
      report.message = "gradient is not finite at iteration " + std::to_string(iter);
      break;
    }

    // Halve the step until the total loss does not increase. The search
    // restarts from the configured step every iteration so one difficult
    // stretch cannot permanently shrink later steps.
    constexpr int kMaxBackoff = 40;
    Eigen::MatrixXd trial;
    Eval next;
    auto line_search = [&](const Eigen::MatrixXd& direction) {
      double alpha = cfg.step_size;
      for (int backoff = 0; backoff < kMaxBackoff; ++backoff) {
        trial = V - alpha * direction;
        next = evaluate(trial, false);
        if (std::isfinite(next.losses.total) && next.losses.total <= cur.losses.total) return true;
        alpha *= 0.5;
      }
      return false;
    };
    auto adam_direction = [&]() -> Eigen::MatrixXd {
      const double bc1 = 1.0 - std::pow(beta1, adam_t);
      const double bc2 = 1.0 - std::pow(beta2, adam_t);
      return (m / bc1).array() / ((v / bc2).array().sqrt() + adam_eps);
    };

    m = beta1 * m + (1.0 - beta1) * cur.grad;
    v = beta2 * v + (1.0 - beta2) * cur.grad.array().square().matrix();
    ++adam_t;
    bool accepted = line_search(adam_direction());
    if (!accepted) {
      // Stale momentum can point uphill and no step length fixes that. Drop
      // the moments and retry along the fresh gradient; only if that fails
      // too is the point stationary within step resolution.
      m = (1.0 - beta1) * cur.grad;
      v = (1.0 - beta2) * cur.grad.array().square().matrix();
      adam_t = 1;
      accepted = line_search(adam_direction());
    }
    if (!accepted) {
      report.converged = true;
      report.message = "line search exhausted (stationary within step resolution)";
      break;
    }

    V = trial;
    report.iterations = iter;  // counts accepted steps only
    const double prev_total = cur.losses.total;
    cur = evaluate(V, true);  // same samples: gradient matches the accepted loss
    report.trace.push_back(cur.losses);

    const double rel_change =
        std::abs(prev_total - cur.losses.total) / std::max(std::abs(prev_total), 1e-30);
    if (rel_change < cfg.convergence_tol) {
      report.converged = true;
      break;
    }
    if (cfg.chamfer_samples > 0) {
      resample();
      cur = evaluate(V, true);
    }
  }

  report.final_vertices = V;
  return report;
}

}  // namespace garment
