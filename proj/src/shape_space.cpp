#include "garment/shape_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SVD>

#include "garment/errors.hpp"
#include "garment/tensor_file.hpp"

namespace garment {

Eigen::VectorXd flatten_vertices(const Eigen::MatrixXd& V) {
  Eigen::VectorXd x(V.rows() * 3);
  for (Eigen::Index i = 0; i < V.rows(); ++i) x.segment<3>(3 * i) = V.row(i).transpose();
  return x;
}

Eigen::MatrixXd unflatten_vertices(const Eigen::VectorXd& x) {
  if (x.size() % 3 != 0) throw InvalidInput("flattened vertex vector length must be a multiple of 3");
  Eigen::MatrixXd V(x.size() / 3, 3);
  for (Eigen::Index i = 0; i < V.rows(); ++i) V.row(i) = x.segment<3>(3 * i).transpose();
  return V;
}

int default_component_count(int sample_count) { return std::min(64, sample_count - 1); }

ShapeSpace fit_pca(const std::vector<Mesh>& canonical_meshes, int d) {
  if (canonical_meshes.size() < 2) throw InvalidInput("fit_pca needs at least 2 meshes");
  const Mesh& first = canonical_meshes.front();
  validate_mesh(first);
  for (std::size_t i = 1; i < canonical_meshes.size(); ++i) {
    if (!same_topology(first, canonical_meshes[i]))
      throw InvalidInput("fit_pca: mesh " + std::to_string(i) + " does not match the topology of mesh 0");
  }
  const Eigen::Index n3 = first.V.rows() * 3;
  const Eigen::Index s = static_cast<Eigen::Index>(canonical_meshes.size());
  if (d < 1) throw InvalidInput("fit_pca: component count must be >= 1");
  if (d > std::min<Eigen::Index>(n3, s))
    throw InvalidInput("fit_pca: component count " + std::to_string(d) + " exceeds min(3N, sampleCount) = " +
                       std::to_string(std::min<Eigen::Index>(n3, s)));

  Eigen::MatrixXd X(n3, s);
  for (Eigen::Index j = 0; j < s; ++j) X.col(j) = flatten_vertices(canonical_meshes[j].V);
  Eigen::VectorXd G = X.rowwise().mean();
  X.colwise() -= G;

  // Thin SVD of the 3N x S centered data; left singular vectors span the
  // sample subspace so at most S columns exist and the decomposition is cheap
  // even for large N.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double rank_tol =
      static_cast<double>(std::max(n3, s)) * std::numeric_limits<double>::epsilon() * std::max(sv(0), 1e-300);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rank_tol) ++rank;
  if (d > rank)
    throw InvalidInput("fit_pca: rank-deficient training set (numerical rank " + std::to_string(rank) +
                       ", requested " + std::to_string(d) + " components)");

  ShapeSpace space;
  space.G = std::move(G);
  space.C = svd.matrixU().leftCols(d);
  space.singular_values = sv.head(d);
  space.faces = first.F;

  for (int c = 0; c < d; ++c) {
    Eigen::Index at = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < n3; ++r) {
      const double a = std::abs(space.C(r, c));
      if (a > best) {
        best = a;
        at = r;
      }
    }
    if (space.C(at, c) < 0.0) space.C.col(c) = -space.C.col(c);
  }
  return space;
}

namespace {

void check_space(const ShapeSpace& space) {
  if (space.G.size() == 0 || space.G.size() % 3 != 0 || space.C.rows() != space.G.size())
    throw InvalidInput("malformed shape space");
}

}  // namespace

Eigen::VectorXd encode(const ShapeSpace& space, const Mesh& mesh) {
  check_space(space);
  if (mesh.V.rows() * 3 != space.G.size() || mesh.F != space.faces)
    throw InvalidInput("encode: mesh topology does not match the shape space");
  return space.C.transpose() * (flatten_vertices(mesh.V) - space.G);
}

Mesh decode(const ShapeSpace& space, const Eigen::VectorXd& alpha) {
  check_space(space);
  if (alpha.size() != space.C.cols())
    throw InvalidInput("decode: coefficient length " + std::to_string(alpha.size()) + " does not match d = " +
                       std::to_string(space.C.cols()));
  Mesh out;
  out.V = unflatten_vertices(space.G + space.C * alpha);
  out.F = space.faces;
  return out;
}

void save_shape_space(const std::filesystem::path& path, const ShapeSpace& space) {
  check_space(space);
  TensorMap tensors;
  tensors.emplace("mean", Tensor::from(space.G));
  tensors.emplace("components", Tensor::from(space.C));
  tensors.emplace("singular_values", Tensor::from(space.singular_values));
  tensors.emplace("faces", Tensor::from(space.faces));
  save_tensors(path, tensors);
}

ShapeSpace load_shape_space(const std::filesystem::path& path) {
  const TensorMap tensors = load_tensors(path);
  ShapeSpace space;
  space.G = tensor_f64(tensors, "mean").col(0);
  space.C = tensor_f64(tensors, "components");
  space.singular_values = tensor_f64(tensors, "singular_values").col(0);
  space.faces = tensor_i32(tensors, "faces");
  check_space(space);
  if (space.singular_values.size() != space.C.cols())
    throw InvalidInput("malformed shape space file: " + path.string());
  return space;
}

}  // namespace garment
