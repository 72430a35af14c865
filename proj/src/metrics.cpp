#include "garment/metrics.hpp"

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "garment/errors.hpp"
#include "garment/io_util.hpp"
#include "garment/spatial.hpp"

namespace garment {

namespace {
constexpr double kMetersToMm = 1000.0;
}

double canonical_l2_mm(const Mesh& pred, const Mesh& gt) {
  if (!same_topology(pred, gt)) throw InvalidInput("metric: topology mismatch");
  if (pred.vertex_count() == 0) throw InvalidInput("metric: empty mesh");
  return (pred.V - gt.V).rowwise().norm().mean() * kMetersToMm;
}

SequenceMetrics evaluate_sequence(const std::vector<Mesh>& pred, const std::vector<Mesh>& gt, double fps) {
  if (pred.empty()) throw InvalidInput("evaluate_sequence: empty prediction");
  if (pred.size() != gt.size())
    throw InvalidInput("evaluate_sequence: sequence lengths differ (" + std::to_string(pred.size()) + " vs " +
                       std::to_string(gt.size()) + ")");
  if (!(fps > 0.0)) throw InvalidInput("evaluate_sequence: fps must be positive");

  SequenceMetrics metrics;
  double l2_total = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const double frame = canonical_l2_mm(pred[t], gt[t]);
    metrics.per_frame_l2_mm.push_back(frame);
    l2_total += frame;
  }
  metrics.posed_l2_mm = l2_total / static_cast<double>(pred.size());

  if (pred.size() >= 3) {
    const double fps2 = fps * fps;
    double acc_total = 0.0;
    Eigen::Index n = pred[0].V.rows();
    for (std::size_t t = 1; t + 1 < pred.size(); ++t) {
      const Eigen::MatrixXd ap = (pred[t + 1].V - 2.0 * pred[t].V + pred[t - 1].V) * fps2;
      const Eigen::MatrixXd ag = (gt[t + 1].V - 2.0 * gt[t].V + gt[t - 1].V) * fps2;
      acc_total += (ap - ag).rowwise().norm().sum() / static_cast<double>(n);
    }
    metrics.acceleration_error = acc_total / static_cast<double>(pred.size() - 2);
  }
  return metrics;
}

double one_way_chamfer(const Mesh& reconstruction, const Eigen::MatrixXd& cloud) {
  if (reconstruction.vertex_count() == 0) throw InvalidInput("one_way_chamfer: empty reconstruction");
  if (cloud.rows() == 0) throw InvalidInput("one_way_chamfer: empty cloud");
  const PointKdTree tree(cloud);
  double total = 0.0;
  for (Eigen::Index i = 0; i < reconstruction.V.rows(); ++i) {
    const Eigen::Vector3d p = reconstruction.V.row(i).transpose();
    total += (cloud.row(tree.nearest(p)).transpose() - p).norm();
  }
  return total / static_cast<double>(reconstruction.V.rows()) * kMetersToMm;
}

void save_metrics(const std::filesystem::path& path, const SequenceMetrics& metrics) {
  nlohmann::json j;
  if (metrics.canonical_l2_mm) j["canonicalL2mm"] = *metrics.canonical_l2_mm;
  j["posedL2mm"] = metrics.posed_l2_mm;
  if (metrics.acceleration_error) j["accelerationError"] = *metrics.acceleration_error;
  if (metrics.one_way_chamfer_mm) j["oneWayChamferMm"] = *metrics.one_way_chamfer_mm;
  j["perFrameL2mm"] = metrics.per_frame_l2_mm;
  if (!metrics.per_frame_chamfer_mm.empty()) j["perFrameChamferMm"] = metrics.per_frame_chamfer_mm;
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace garment
