#include "garment/boundary.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "garment/errors.hpp"
#include "garment/io_util.hpp"

namespace garment {

std::vector<BoundaryLoop> extract_boundary_loops(const Mesh& mesh) {
  // Undirected edge -> use count; directed halfedge kept for the walk.
  std::map<std::array<int, 2>, int> edge_count;
  std::map<std::array<int, 2>, std::array<int, 2>> directed;  // undirected -> face direction
  for (int f = 0; f < mesh.face_count(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int u = mesh.F(f, k), v = mesh.F(f, (k + 1) % 3);
      std::array<int, 2> key{std::min(u, v), std::max(u, v)};
      const int count = ++edge_count[key];
      if (count > 2)
        throw InvalidInput("non-manifold edge (" + std::to_string(key[0]) + "," +
                           std::to_string(key[1]) + ")");
      directed[key] = {u, v};
    }
  }

  // Boundary halfedges in face direction, as a per-vertex outgoing multimap.
  std::map<int, std::set<int>> outgoing;
  int boundary_edges = 0;
  for (const auto& [key, count] : edge_count) {
    if (count != 1) continue;
    const auto& he = directed[key];
    outgoing[he[0]].insert(he[1]);
    ++boundary_edges;
  }

  std::vector<BoundaryLoop> loops;
  int consumed = 0;
  while (!outgoing.empty()) {
    const int start = outgoing.begin()->first;
    BoundaryLoop loop;
    int cur = start;
    while (true) {
      loop.vertices.push_back(cur);
      auto it = outgoing.find(cur);
      if (it == outgoing.end() || it->second.empty())
        throw InvalidInput("boundary walk stuck at vertex " + std::to_string(cur) +
                           " (mesh is not edge-manifold)");
      const int next = *it->second.begin();
      it->second.erase(it->second.begin());
      if (it->second.empty()) outgoing.erase(it);
      ++consumed;
      if (next == start) break;
      cur = next;
    }
    loops.push_back(std::move(loop));
  }
  if (consumed != boundary_edges)
    throw InvalidInput("boundary edges do not close into loops");

  std::sort(loops.begin(), loops.end(), [](const BoundaryLoop& a, const BoundaryLoop& b) {
    if (a.vertices.size() != b.vertices.size()) return a.vertices.size() > b.vertices.size();
    return *std::min_element(a.vertices.begin(), a.vertices.end()) <
           *std::min_element(b.vertices.begin(), b.vertices.end());
  });
  return loops;
}

void assign_boundary_labels(std::vector<BoundaryLoop>& loops,
                            const std::vector<std::pair<std::string, std::vector<int>>>& labels) {
  for (const auto& [label, seeds] : labels) {
    if (seeds.empty()) throw InvalidInput("label '" + label + "' has no seed vertices");
    int found = -1;
    for (std::size_t i = 0; i < loops.size(); ++i) {
      const auto& vs = loops[i].vertices;
      const bool all = std::all_of(seeds.begin(), seeds.end(), [&](int s) {
        return std::find(vs.begin(), vs.end(), s) != vs.end();
      });
      if (!all) continue;
      if (found >= 0)
        throw InvalidInput("seeds of label '" + label + "' match more than one loop");
      found = static_cast<int>(i);
    }
    if (found < 0)
      throw InvalidInput("no boundary loop contains all seeds of label '" + label + "'");
    if (!loops[found].label.empty())
      throw InvalidInput("loop already labeled '" + loops[found].label + "', cannot relabel '" +
                         label + "'");
    loops[found].label = label;
  }
}

void assign_boundary_labels_from_file(std::vector<BoundaryLoop>& loops,
                                      const std::filesystem::path& json_path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(json_path));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("bad boundary label file " + json_path.string() + ": " + e.what());
  }
  std::vector<std::pair<std::string, std::vector<int>>> labels;
  for (const auto& [key, value] : j.items())
    labels.emplace_back(key, value.get<std::vector<int>>());
  assign_boundary_labels(loops, labels);
}

const BoundaryLoop& find_loop(const std::vector<BoundaryLoop>& loops, const std::string& label) {
  for (const auto& loop : loops)
    if (loop.label == label) return loop;
  throw InvalidInput("no boundary loop labeled '" + label + "'");
}

}  // namespace garment
