#pragma once

#include <Eigen/SparseCore>

#include "garment/mesh.hpp"

namespace garment {

enum class LaplacianKind { Cotangent, Uniform };

// Sparse vertex Laplacian. Row i carries w_ij on the 1-ring and -sum(w_ij)
// on the diagonal, so L * 1 = 0.
//   cotangent: w_ij = (cot a_ij + cot b_ij) / 2 over the edge's opposite angles
//   uniform:   w_ij = 1 / deg(i)
struct LaplacianOperator {
  LaplacianKind kind;
  Eigen::SparseMatrix<double, Eigen::RowMajor> M;

  // L applied to per-vertex positions (or any per-vertex columns).
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const { return M * X; }
};

// Throws InvalidInput for a zero-area face under the cotangent kind.
LaplacianOperator build_laplacian(const Mesh& mesh, LaplacianKind kind);

}  // namespace garment
