#include "garment/remesh.hpp"

#include <nlohmann/json.hpp>

#include "garment/errors.hpp"
#include "garment/io_util.hpp"
#include "garment/spatial.hpp"

namespace garment {

BarycentricMap build_barycentric_map(const Mesh& templ, const Mesh& registered) {
  validate_mesh(templ);
  validate_mesh(registered);
  BarycentricMap map;
  map.face.resize(templ.vertex_count());
  map.weights.resize(templ.vertex_count(), 3);
  map.template_faces = templ.F;
  map.registered_vertex_count = registered.vertex_count();
  map.registered_faces = registered.F;

  const FaceBvh bvh(registered);
  for (int i = 0; i < templ.vertex_count(); ++i) {
    const FaceProjection proj = bvh.nearest_face(templ.V.row(i).transpose());
    map.face[i] = proj.face;
    map.weights.row(i) = proj.bary;
  }
  return map;
}

Mesh apply_barycentric_map(const BarycentricMap& map, const Mesh& frame) {
  if (frame.vertex_count() != map.registered_vertex_count ||
      frame.F.rows() != map.registered_faces.rows() || frame.F != map.registered_faces)
    throw InvalidInput("frame topology does not match the mesh the map was built on");

  Mesh out;
  out.F = map.template_faces;
  out.V.resize(map.face.size(), 3);
  for (int i = 0; i < map.face.size(); ++i) {
    const int f = map.face[i];
    out.V.row(i) = map.weights(i, 0) * frame.V.row(frame.F(f, 0)) +
                   map.weights(i, 1) * frame.V.row(frame.F(f, 1)) +
                   map.weights(i, 2) * frame.V.row(frame.F(f, 2));
  }
  return out;
}

void save_barycentric_map(const std::filesystem::path& path, const BarycentricMap& map) {
  nlohmann::json j;
  j["registered_vertex_count"] = map.registered_vertex_count;
  auto faces_to_json = [](const Eigen::MatrixXi& F) {
    nlohmann::json arr = nlohmann::json::array();
    for (int f = 0; f < F.rows(); ++f) arr.push_back({F(f, 0), F(f, 1), F(f, 2)});
    return arr;
  };
  j["registered_faces"] = faces_to_json(map.registered_faces);
  j["template_faces"] = faces_to_json(map.template_faces);
  nlohmann::json entries = nlohmann::json::array();
  for (int i = 0; i < map.face.size(); ++i)
    entries.push_back({{"face", map.face[i]},
                       {"weights", {map.weights(i, 0), map.weights(i, 1), map.weights(i, 2)}}});
  j["entries"] = entries;
  write_file_atomic(path, j.dump(2) + "\n");
}

BarycentricMap load_barycentric_map(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("bad barycentric map file " + path.string() + ": " + e.what());
  }
  BarycentricMap map;
  map.registered_vertex_count = j.at("registered_vertex_count").get<int>();
  auto faces_from_json = [](const nlohmann::json& arr) {
    Eigen::MatrixXi F(arr.size(), 3);
    for (std::size_t f = 0; f < arr.size(); ++f)
      for (int k = 0; k < 3; ++k) F(static_cast<int>(f), k) = arr[f][k].get<int>();
    return F;
  };
  map.registered_faces = faces_from_json(j.at("registered_faces"));
  map.template_faces = faces_from_json(j.at("template_faces"));
  const auto& entries = j.at("entries");
  map.face.resize(entries.size());
  map.weights.resize(entries.size(), 3);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    map.face[static_cast<int>(i)] = entries[i].at("face").get<int>();
    for (int k = 0; k < 3; ++k)
      map.weights(static_cast<int>(i), k) = entries[i].at("weights")[k].get<double>();
  }
  return map;
}

}  // namespace garment
