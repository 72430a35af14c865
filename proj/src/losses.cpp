#include "garment/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "garment/errors.hpp"
#include "garment/spatial.hpp"

namespace garment {

void validate_loss_weights(const LossWeights& weights) {
  const double all[] = {weights.ce,
                        weights.alpha_l2,
                        weights.canonical_vertex_l2,
                        weights.canonical_interpenetration,
                        weights.canonical_laplacian,
                        weights.posed_vertex_l2,
                        weights.posed_interpenetration,
                        weights.posed_laplacian,
                        weights.temporal};
  for (double w : all)
    if (!(w >= 0.0)) throw InvalidInput("loss weights must be nonnegative");
  for (double w : weights.iteration_weights)
    if (!(w >= 0.0)) throw InvalidInput("iteration weights must be nonnegative");
}

double cross_entropy(const Eigen::MatrixXd& probabilities, const std::vector<int>& labels) {
  if (probabilities.rows() == 0) throw InvalidInput("cross_entropy: empty input");
  if (static_cast<Eigen::Index>(labels.size()) != probabilities.rows())
    throw InvalidInput("cross_entropy: label count does not match distribution count");
  double total = 0.0;
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
    const double sum = probabilities.row(i).sum();
    if (std::abs(sum - 1.0) > 1e-6)
      throw InvalidInput("cross_entropy: row " + std::to_string(i) + " sums to " + std::to_string(sum));
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= probabilities.cols())
      throw InvalidInput("cross_entropy: label " + std::to_string(label) + " out of range at row " +
                         std::to_string(i));
    total += -std::log(std::clamp(probabilities(i, label), 1e-12, 1.0));
  }
  return total / static_cast<double>(probabilities.rows());
}

double interpenetration_loss(const Mesh& garment, const Mesh& body) {
  if (garment.vertex_count() == 0 || body.vertex_count() == 0)
    throw InvalidInput("interpenetration_loss: empty mesh");
  validate_mesh(body);
  const Eigen::MatrixXd normals = vertex_normals(body).N;
  const PointKdTree tree(body.V);
  double total = 0.0;
  for (Eigen::Index i = 0; i < garment.V.rows(); ++i) {
    const Eigen::Vector3d t = garment.V.row(i).transpose();
    const int h = tree.nearest(t);
    const Eigen::Vector3d vh = body.V.row(h).transpose();
    const Eigen::Vector3d nh = normals.row(h).transpose();
    total += std::max(0.0, -nh.dot(t - vh));
  }
  return total / static_cast<double>(garment.V.rows());
}

double laplacian_regularization(const Mesh& pred, const Mesh& gt, const LaplacianOperator& L, bool clamp_negative) {
  if (!same_topology(pred, gt)) throw InvalidInput("laplacian_regularization: topology mismatch");
  if (L.M.rows() != pred.V.rows()) throw InvalidInput("laplacian_regularization: operator size mismatch");
  const Eigen::MatrixXd lp = L.apply(pred.V);
  const Eigen::MatrixXd lg = L.apply(gt.V);
  const double value = (lp.rowwise().norm() - lg.rowwise().norm()).mean();
  return clamp_negative ? std::max(0.0, value) : value;
}

double temporal_constraint(const std::vector<Mesh>& sequence) {
  if (sequence.size() < 2) throw InvalidInput("temporal_constraint: need at least 2 frames");
  for (std::size_t t = 1; t < sequence.size(); ++t)
    if (!same_topology(sequence[0], sequence[t])) throw InvalidInput("temporal_constraint: topology changes at frame " +
                                                                     std::to_string(t));
  double total = 0.0;
  for (std::size_t t = 1; t < sequence.size(); ++t)
    total += (sequence[t].V - sequence[t - 1].V).rowwise().squaredNorm().mean();
  return total / static_cast<double>(sequence.size() - 1);
}

namespace {

double mean_squared_vertex_error(const Mesh& pred, const Mesh& gt) {
  if (!same_topology(pred, gt)) throw InvalidInput("vertex loss: topology mismatch");
  return (pred.V - gt.V).rowwise().squaredNorm().mean();
}

LossBreakdown finish(std::vector<double> terms, std::vector<double> weights) {
  LossBreakdown out;
  out.terms = std::move(terms);
  out.weights = std::move(weights);
  out.total = 0.0;
  for (std::size_t i = 0; i < out.terms.size(); ++i) out.total += out.terms[i] * out.weights[i];
  return out;
}

}  // namespace

LossBreakdown canonical_loss(const CanonicalLossInputs& inputs, const LossWeights& weights) {
  validate_loss_weights(weights);
  if (inputs.alpha_pred.size() != inputs.alpha_gt.size())
    throw InvalidInput("canonical_loss: coefficient lengths differ");
  const double ce = cross_entropy(inputs.segmentation_probabilities, inputs.segmentation_labels);
  const double alpha = (inputs.alpha_pred - inputs.alpha_gt).squaredNorm();
  const double vertex = mean_squared_vertex_error(inputs.canonical_pred, inputs.canonical_gt);
  const double interp = interpenetration_loss(inputs.canonical_pred, inputs.body);
  const LaplacianOperator L = build_laplacian(inputs.canonical_gt, LaplacianKind::Cotangent);
  const double lap = laplacian_regularization(inputs.canonical_pred, inputs.canonical_gt, L);
  return finish({ce, alpha, vertex, interp, lap},
                {weights.ce, weights.alpha_l2, weights.canonical_vertex_l2, weights.canonical_interpenetration,
                 weights.canonical_laplacian});
}

LossBreakdown posed_loss(const PosedLossInputs& inputs, const LossWeights& weights) {
  validate_loss_weights(weights);
  if (inputs.pred.empty()) throw InvalidInput("posed_loss: empty sequence");
  if (inputs.gt.size() != inputs.pred.size() || inputs.bodies.size() != inputs.pred.size())
    throw InvalidInput("posed_loss: per-frame inputs are not aligned");

  double vertex = 0.0, interp = 0.0, lap = 0.0;
  for (std::size_t t = 0; t < inputs.pred.size(); ++t) {
    vertex += mean_squared_vertex_error(inputs.pred[t], inputs.gt[t]);
    interp += interpenetration_loss(inputs.pred[t], inputs.bodies[t]);
    const LaplacianOperator L = build_laplacian(inputs.gt[t], LaplacianKind::Cotangent);
    lap += laplacian_regularization(inputs.pred[t], inputs.gt[t], L);
  }
  const double frames = static_cast<double>(inputs.pred.size());
  vertex /= frames;
  interp /= frames;
  lap /= frames;
  const double temporal = inputs.pred.size() >= 2 ? temporal_constraint(inputs.pred) : 0.0;
  return finish({vertex, interp, lap, temporal},
                {weights.posed_vertex_l2, weights.posed_interpenetration, weights.posed_laplacian, weights.temporal});
}

double aggregate_posed_loss(const std::vector<LossBreakdown>& per_iteration, const std::vector<double>& w) {
  if (per_iteration.size() != w.size())
    throw InvalidInput("aggregate_posed_loss: iteration count does not match weight count");
  double total = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (!(w[j] >= 0.0)) throw InvalidInput("aggregate_posed_loss: weights must be nonnegative");
    total += w[j] * per_iteration[j].total;
  }
  return total;
}

}  // namespace garment
