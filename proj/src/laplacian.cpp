#include "garment/laplacian.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <map>
#include <vector>

#include "garment/errors.hpp"

namespace garment {

LaplacianOperator build_laplacian(const Mesh& mesh, LaplacianKind kind) {
  validate_mesh(mesh);
  const int n = mesh.vertex_count();
  std::map<std::array<int, 2>, double> w;  // undirected edge -> weight accumulator

  if (kind == LaplacianKind::Cotangent) {
    for (int f = 0; f < mesh.face_count(); ++f) {
      const Eigen::Vector3d p[3] = {mesh.V.row(mesh.F(f, 0)), mesh.V.row(mesh.F(f, 1)),
                                    mesh.V.row(mesh.F(f, 2))};
      const double double_area = (p[1] - p[0]).cross(p[2] - p[0]).norm();
      double max_edge_sq = 0.0;
      for (int k = 0; k < 3; ++k)
        max_edge_sq = std::max(max_edge_sq, (p[(k + 1) % 3] - p[k]).squaredNorm());
      if (double_area <= 1e-12 * max_edge_sq)
        throw InvalidInput("zero-area face " + std::to_string(f) +
                           " encountered while building cotangent Laplacian");
      // cot of the angle at corner k, opposite the edge (k+1, k+2)
      for (int k = 0; k < 3; ++k) {
        const Eigen::Vector3d u = p[(k + 1) % 3] - p[k];
        const Eigen::Vector3d v = p[(k + 2) % 3] - p[k];
        const double cot = u.dot(v) / double_area;  // cross norm of u,v equals 2*area
        int i = mesh.F(f, (k + 1) % 3), j = mesh.F(f, (k + 2) % 3);
        if (i > j) std::swap(i, j);
        w[{i, j}] += 0.5 * cot;
      }
    }
  } else {
    std::vector<int> degree(n, 0);
    std::map<std::array<int, 2>, bool> seen;
    for (int f = 0; f < mesh.face_count(); ++f) {
      for (int k = 0; k < 3; ++k) {
        int i = mesh.F(f, k), j = mesh.F(f, (k + 1) % 3);
        if (i > j) std::swap(i, j);
        if (!seen[{i, j}]) {
          seen[{i, j}] = true;
          ++degree[i];
          ++degree[j];
        }
      }
    }
    for (const auto& [e, _] : seen) {
      (void)_;
      w[{e[0], e[1]}] = 0.0;  // filled below, weights differ per row
    }
    // Uniform weights are row-dependent (1/deg(i)); emit directly.
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> diag(n, 0.0);
    for (const auto& [e, _] : w) {
      (void)_;
      const double wi = 1.0 / degree[e[0]];
      const double wj = 1.0 / degree[e[1]];
      trip.emplace_back(e[0], e[1], wi);
      trip.emplace_back(e[1], e[0], wj);
      diag[e[0]] -= wi;
      diag[e[1]] -= wj;
    }
    for (int i = 0; i < n; ++i)
      if (degree[i] > 0) trip.emplace_back(i, i, diag[i]);
    LaplacianOperator op;
    op.kind = kind;
    op.M.resize(n, n);
    op.M.setFromTriplets(trip.begin(), trip.end());
    return op;
  }

  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> diag(n, 0.0);
  for (const auto& [e, weight] : w) {
    trip.emplace_back(e[0], e[1], weight);
    trip.emplace_back(e[1], e[0], weight);
    diag[e[0]] -= weight;
    diag[e[1]] -= weight;
  }
  for (int i = 0; i < n; ++i)
    if (diag[i] != 0.0) trip.emplace_back(i, i, diag[i]);
  LaplacianOperator op;
  op.kind = kind;
  op.M.resize(n, n);
  op.M.setFromTriplets(trip.begin(), trip.end());
  return op;
}

}  // namespace garment
