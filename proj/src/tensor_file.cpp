#include "garment/tensor_file.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "garment/errors.hpp"
#include "garment/io_util.hpp"

namespace garment {

namespace {

constexpr char kMagic[8] = {'G', 'R', 'M', 'T', 'N', 'S', 'R', '1'};
constexpr std::uint32_t kVersion = 1;

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const std::string& s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
  return v;
}

std::uint64_t read_u64(const std::string& s, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
  return v;
}

}  // namespace

void save_tensors(const std::filesystem::path& path, const TensorMap& tensors) {
  std::string blob;
  nlohmann::json descriptor = nlohmann::json::array();
  for (const auto& [name, t] : tensors) {
    nlohmann::json entry;
    entry["name"] = name;
    entry["offset"] = blob.size();
    if (t.dtype == Tensor::Dtype::F64) {
      entry["dtype"] = "f64";
      entry["shape"] = {t.f64.rows(), t.f64.cols()};
      for (Eigen::Index r = 0; r < t.f64.rows(); ++r)
        for (Eigen::Index c = 0; c < t.f64.cols(); ++c) {
          const double v = t.f64(r, c);
          char bytes[8];
          std::memcpy(bytes, &v, 8);
          blob.append(bytes, 8);
        }
    } else {
      entry["dtype"] = "i32";
      entry["shape"] = {t.i32.rows(), t.i32.cols()};
      for (Eigen::Index r = 0; r < t.i32.rows(); ++r)
        for (Eigen::Index c = 0; c < t.i32.cols(); ++c) {
          const std::int32_t v = t.i32(r, c);
          char bytes[4];
          std::memcpy(bytes, &v, 4);
          blob.append(bytes, 4);
        }
    }
    descriptor.push_back(entry);
  }

  std::string out;
  out.append(kMagic, 8);
  append_u32(out, kVersion);
  append_u32(out, static_cast<std::uint32_t>(tensors.size()));
  const std::string desc = descriptor.dump();
  append_u64(out, desc.size());
  out += desc;
  out += blob;
  write_file_atomic(path, out);
}

TensorMap load_tensors(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  if (data.size() < 24 || std::memcmp(data.data(), kMagic, 8) != 0)
    throw InvalidInput("not a tensor container: " + path.string());
  if (read_u32(data, 8) != kVersion)
    throw InvalidInput("unsupported tensor container version in " + path.string());
  const std::uint32_t count = read_u32(data, 12);
  const std::uint64_t desc_len = read_u64(data, 16);
  if (24 + desc_len > data.size()) throw InvalidInput("truncated tensor container: " + path.string());

  nlohmann::json descriptor;
  try {
    descriptor = nlohmann::json::parse(data.substr(24, desc_len));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("bad tensor descriptor in " + path.string() + ": " + e.what());
  }
  if (descriptor.size() != count)
    throw InvalidInput("tensor count mismatch in " + path.string());

  const std::size_t blob_at = 24 + desc_len;
  TensorMap out;
  for (const auto& entry : descriptor) {
    const std::string name = entry.at("name").get<std::string>();
    const std::string dtype = entry.at("dtype").get<std::string>();
    const Eigen::Index rows = entry.at("shape")[0].get<Eigen::Index>();
    const Eigen::Index cols = entry.at("shape")[1].get<Eigen::Index>();
    const std::size_t offset = blob_at + entry.at("offset").get<std::size_t>();
    const std::size_t elems = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    Tensor t;
    if (dtype == "f64") {
      t.dtype = Tensor::Dtype::F64;
      if (offset + elems * 8 > data.size())
        throw InvalidInput("tensor '" + name + "' overruns file " + path.string());
      t.f64.resize(rows, cols);
      std::size_t at = offset;
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
          double v;
          std::memcpy(&v, data.data() + at, 8);
          t.f64(r, c) = v;
          at += 8;
        }
    } else if (dtype == "i32") {
      t.dtype = Tensor::Dtype::I32;
      if (offset + elems * 4 > data.size())
        throw InvalidInput("tensor '" + name + "' overruns file " + path.string());
      t.i32.resize(rows, cols);
      std::size_t at = offset;
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
          std::int32_t v;
          std::memcpy(&v, data.data() + at, 4);
          t.i32(r, c) = v;
          at += 4;
        }
    } else {
      throw InvalidInput("unknown dtype '" + dtype + "' in " + path.string());
    }
    out.emplace(name, std::move(t));
  }
  return out;
}

bool has_tensor(const TensorMap& map, const std::string& name) { return map.count(name) > 0; }

const Eigen::MatrixXd& tensor_f64(const TensorMap& map, const std::string& name) {
  auto it = map.find(name);
  if (it == map.end()) throw InvalidInput("missing tensor '" + name + "'");
  if (it->second.dtype != Tensor::Dtype::F64)
    throw InvalidInput("tensor '" + name + "' is not f64");
  return it->second.f64;
}

const Eigen::MatrixXi& tensor_i32(const TensorMap& map, const std::string& name) {
  auto it = map.find(name);
  if (it == map.end()) throw InvalidInput("missing tensor '" + name + "'");
  if (it->second.dtype != Tensor::Dtype::I32)
    throw InvalidInput("tensor '" + name + "' is not i32");
  return it->second.i32;
}

}  // namespace garment
