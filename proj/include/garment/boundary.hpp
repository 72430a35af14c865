#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "garment/mesh.hpp"

namespace garment {

// Ordered cycle of vertex indices along a mesh boundary. Each consecutive
// pair (including last->first) is an edge used by exactly one face.
struct BoundaryLoop {
  std::string label;  // empty until assigned from config
  std::vector<int> vertices;
};

// All boundary loops of an edge-manifold mesh, ordered by descending vertex
// count (ties by smallest contained vertex index). Throws InvalidInput on a
// non-manifold edge.
std::vector<BoundaryLoop> extract_boundary_loops(const Mesh& mesh);

// Assigns labels from a map of label -> seed vertex indices: a loop gets the
// label whose seeds it contains. Every seed of a label must lie on the same
// loop and no two labels may claim one loop. Unlabeled loops are kept.
void assign_boundary_labels(std::vector<BoundaryLoop>& loops,
                            const std::vector<std::pair<std::string, std::vector<int>>>& labels);

// Reads a JSON sidecar of the form {"hem": [3, 17], "waist": [240]} and
// applies it to the loops.
void assign_boundary_labels_from_file(std::vector<BoundaryLoop>& loops,
                                      const std::filesystem::path& json_path);

// The loop carrying `label`, or throws InvalidInput.
const BoundaryLoop& find_loop(const std::vector<BoundaryLoop>& loops, const std::string& label);

}  // namespace garment
