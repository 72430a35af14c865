#pragma once

#include <filesystem>
#include <string>

#include "garment/mesh.hpp"

namespace garment {

// ASCII OBJ reader. Accepts `v x y z` and triangular `f` records (vertex
// indices may carry /vt/vn suffixes, which are ignored). Normals and UVs in
// the file are discarded; quads and higher polygons are rejected.
// Throws InvalidInput with the offending line number on malformed input.
Mesh load_obj(const std::filesystem::path& path);

// Writes `v` and `f` records only. Coordinates use shortest round-trip
// formatting, so load_obj(save_obj(m)) reproduces positions exactly.
void save_obj(const std::filesystem::path& path, const Mesh& mesh);

// OBJ text of a mesh (what save_obj writes).
std::string obj_string(const Mesh& mesh);

}  // namespace garment
