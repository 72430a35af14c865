#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <map>
#include <string>

namespace garment {

// Binary named-tensor container:
//   bytes 0..7   magic "GRMTNSR1"
//   bytes 8..11  version (u32 little-endian)
//   bytes 12..15 tensor count (u32 little-endian)
//   u64 descriptor length, JSON descriptor (name, dtype, shape, byte offset)
//   raw data blob: row-major matrices, little-endian, f64 or i32
//
// Matrices only; vectors are stored as n x 1.
struct Tensor {
  enum class Dtype { F64, I32 };
  Dtype dtype = Dtype::F64;
  Eigen::MatrixXd f64;  // valid when dtype == F64
  Eigen::MatrixXi i32;  // valid when dtype == I32

  static Tensor from(const Eigen::MatrixXd& m) { return {Dtype::F64, m, {}}; }
  static Tensor from(const Eigen::VectorXd& v) { return {Dtype::F64, v, {}}; }
  static Tensor from(const Eigen::MatrixXi& m) { return {Dtype::I32, {}, m}; }
};

using TensorMap = std::map<std::string, Tensor>;

void save_tensors(const std::filesystem::path& path, const TensorMap& tensors);
TensorMap load_tensors(const std::filesystem::path& path);

// Lookup helpers that throw InvalidInput on a missing name or dtype mismatch.
const Eigen::MatrixXd& tensor_f64(const TensorMap& map, const std::string& name);
const Eigen::MatrixXi& tensor_i32(const TensorMap& map, const std::string& name);
bool has_tensor(const TensorMap& map, const std::string& name);

}  // namespace garment
