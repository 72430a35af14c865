#pragma once

#include <Eigen/Core>
#include <vector>

#include "garment/mesh.hpp"

namespace garment {

// Closest point on triangle (a,b,c) to p, with clamped barycentric weights
// (each in [0,1], summing to 1).
struct TrianglePoint {
  Eigen::Vector3d point;
  Eigen::Vector3d bary;
};
TrianglePoint closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                        const Eigen::Vector3d& b, const Eigen::Vector3d& c);

// Result of a nearest-face query.
struct FaceProjection {
  int face = -1;
  Eigen::Vector3d bary = Eigen::Vector3d::Zero();
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  double distance = 0.0;
};

// Axis-aligned BVH over mesh faces. Pruning only: query results are exact,
// and distance ties resolve to the lowest face index.
class FaceBvh {
 public:
  explicit FaceBvh(const Mesh& mesh);
  FaceProjection nearest_face(const Eigen::Vector3d& p) const;

 private:
  struct Node {
    Eigen::Vector3d lo, hi;
    int left = -1, right = -1;  // children, or -1 for leaf
    int begin = 0, end = 0;     // leaf range into face_order_
  };
  int build(int begin, int end, std::vector<Eigen::Vector3d>& centroids);
  double box_dist_sq(const Node& n, const Eigen::Vector3d& p) const;

  const Eigen::MatrixXd V_;
  const Eigen::MatrixXi F_;
  std::vector<Node> nodes_;
  std::vector<int> face_order_;
  int root_ = -1;
};

// Convenience wrapper: exact nearest face of `mesh` to `p`.
FaceProjection nearest_face_projection(const Eigen::Vector3d& p, const Mesh& mesh);

// KD-tree over a fixed point set. All queries are exact; distance ties
// resolve to the lowest point index.
class PointKdTree {
 public:
  explicit PointKdTree(const Eigen::MatrixXd& points);

  int nearest(const Eigen::Vector3d& p) const;
  // K nearest indices ordered by ascending (distance, index).
  std::vector<int> knearest(const Eigen::Vector3d& p, int k) const;
  // All indices within `radius`, ordered by ascending (distance, index).
  std::vector<int> radius(const Eigen::Vector3d& p, double radius) const;

  int size() const { return static_cast<int>(points_.rows()); }
  const Eigen::MatrixXd& points() const { return points_; }

 private:
  struct Node {
    Eigen::Vector3d lo, hi;
    int left = -1, right = -1;
    int begin = 0, end = 0;
  };
  int build(int begin, int end);
  double box_dist_sq(const Node& n, const Eigen::Vector3d& p) const;

  Eigen::MatrixXd points_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
  int root_ = -1;
};

}  // namespace garment
