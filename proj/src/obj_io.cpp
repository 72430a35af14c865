#include "garment/obj_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "garment/errors.hpp"
#include "garment/io_util.hpp"

namespace garment {

namespace {

[[noreturn]] void parse_fail(const std::filesystem::path& path, int line, const std::string& msg) {
  throw InvalidInput(path.string() + ":" + std::to_string(line) + ": " + msg);
}

// Leading vertex index of an `f` token such as "3", "3/1" or "3/1/2".
int face_index_token(const std::string& tok, const std::filesystem::path& path, int line) {
  const std::string head = tok.substr(0, tok.find('/'));
  int idx = 0;
  const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), idx);
  if (ec != std::errc() || ptr != head.data() + head.size())
    parse_fail(path, line, "bad face index '" + tok + "'");
  return idx;
}

}  // namespace

Mesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open OBJ file: " + path.string());

  std::vector<Eigen::Vector3d> verts;
  std::vector<Eigen::Vector3i> faces;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key) || key[0] == '#') continue;
    if (key == "v") {
      Eigen::Vector3d p;
      if (!(ss >> p.x() >> p.y() >> p.z()))
        parse_fail(path, lineno, "vertex record needs three coordinates");
      verts.push_back(p);
    } else if (key == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) idx.push_back(face_index_token(tok, path, lineno));
      if (idx.size() < 3) parse_fail(path, lineno, "face record needs three indices");
      if (idx.size() > 3) parse_fail(path, lineno, "non-triangular face (" +
                                                       std::to_string(idx.size()) + " vertices)");
      for (int i : idx)
        if (i < 1 || i > static_cast<int>(verts.size()))
          parse_fail(path, lineno, "face index " + std::to_string(i) + " out of range (have " +
                                       std::to_string(verts.size()) + " vertices)");
      faces.emplace_back(idx[0] - 1, idx[1] - 1, idx[2] - 1);
    }
    // vn/vt/o/g/s/usemtl/mtllib and anything else: ignored, recomputed as needed
  }

  Mesh mesh;
  mesh.V.resize(verts.size(), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) mesh.V.row(i) = verts[i];
  mesh.F.resize(faces.size(), 3);
  for (std::size_t i = 0; i < faces.size(); ++i) mesh.F.row(i) = faces[i];
  validate_mesh(mesh);
  return mesh;
}

std::string obj_string(const Mesh& mesh) {
  std::string out;
  out.reserve(static_cast<std::size_t>(mesh.vertex_count()) * 32 +
              static_cast<std::size_t>(mesh.face_count()) * 16);
  for (int i = 0; i < mesh.vertex_count(); ++i) {
    out += "v ";
    out += format_double(mesh.V(i, 0));
    out += ' ';
    out += format_double(mesh.V(i, 1));
    out += ' ';
    out += format_double(mesh.V(i, 2));
    out += '\n';
  }
  for (int f = 0; f < mesh.face_count(); ++f) {
    out += "f ";
    out += std::to_string(mesh.F(f, 0) + 1);
    out += ' ';
    out += std::to_string(mesh.F(f, 1) + 1);
    out += ' ';
    out += std::to_string(mesh.F(f, 2) + 1);
    out += '\n';
  }
  return out;
}

void save_obj(const std::filesystem::path& path, const Mesh& mesh) {
  validate_mesh(mesh);
  write_file_atomic(path, obj_string(mesh));
}

}  // namespace garment
