#include "garment/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "garment/errors.hpp"

namespace garment {

namespace {

Eigen::Vector3d closest_point_on_segment(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                         const Eigen::Vector3d& b, double& t) {
  const Eigen::Vector3d ab = b - a;
  const double len_sq = ab.squaredNorm();
  t = len_sq > 0.0 ? std::clamp((p - a).dot(ab) / len_sq, 0.0, 1.0) : 0.0;
  return a + t * ab;
}

}  // namespace

// Voronoi-region closest point (Ericson, Real-Time Collision Detection 5.1.5),
// extended to return clamped barycentric weights.
TrianglePoint closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                        const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return {a, {1, 0, 0}};

  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return {b, {0, 1, 0}};

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 && d1 - d3 > 0.0) {
    const double v = d1 / (d1 - d3);
    return {a + v * ab, {1.0 - v, v, 0.0}};
  }

  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return {c, {0, 0, 1}};

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 && d2 - d6 > 0.0) {
    const double w = d2 / (d2 - d6);
    return {a + w * ac, {1.0 - w, 0.0, w}};
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 && (d4 - d3) + (d5 - d6) > 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {b + w * (c - b), {0.0, 1.0 - w, w}};
  }

  const double denom = va + vb + vc;
  if (denom > 0.0) {
    const double v = vb / denom, w = vc / denom;
    TrianglePoint r{a + v * ab + w * ac, {1.0 - v - w, v, w}};
    if (r.point.allFinite() && r.bary.allFinite()) return r;
  }

  // Degenerate (collinear) triangle: fall back to the closest edge point.
  TrianglePoint best{a, {1, 0, 0}};
  double best_sq = (p - a).squaredNorm();
  const Eigen::Vector3d verts[3] = {a, b, c};
  for (int k = 0; k < 3; ++k) {
    double t = 0.0;
    const Eigen::Vector3d q = closest_point_on_segment(p, verts[k], verts[(k + 1) % 3], t);
    const double d = (p - q).squaredNorm();
    if (d < best_sq) {
      best_sq = d;
      best.point = q;
      best.bary.setZero();
      best.bary[k] = 1.0 - t;
      best.bary[(k + 1) % 3] = t;
    }
  }
  return best;
}

// ---- FaceBvh ----------------------------------------------------------------

FaceBvh::FaceBvh(const Mesh& mesh) : V_(mesh.V), F_(mesh.F) {
  if (mesh.face_count() == 0) throw InvalidInput("nearest-face query over empty mesh");
  face_order_.resize(mesh.face_count());
  std::iota(face_order_.begin(), face_order_.end(), 0);
  std::vector<Eigen::Vector3d> centroids(mesh.face_count());
  for (int f = 0; f < mesh.face_count(); ++f)
    centroids[f] =
        (V_.row(F_(f, 0)) + V_.row(F_(f, 1)) + V_.row(F_(f, 2))).transpose() / 3.0;
  nodes_.reserve(2 * mesh.face_count());
  root_ = build(0, mesh.face_count(), centroids);
}

int FaceBvh::build(int begin, int end, std::vector<Eigen::Vector3d>& centroids) {
  Node node;
  node.lo.setConstant(std::numeric_limits<double>::infinity());
  node.hi.setConstant(-std::numeric_limits<double>::infinity());
  Eigen::Vector3d clo = node.lo, chi = node.hi;
  for (int i = begin; i < end; ++i) {
    const int f = face_order_[i];
    for (int k = 0; k < 3; ++k) {
      node.lo = node.lo.cwiseMin(V_.row(F_(f, k)).transpose());
      node.hi = node.hi.cwiseMax(V_.row(F_(f, k)).transpose());
    }
    clo = clo.cwiseMin(centroids[f]);
    chi = chi.cwiseMax(centroids[f]);
  }

  constexpr int kLeafSize = 4;
  if (end - begin <= kLeafSize) {
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int axis = 0;
  (chi - clo).maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(face_order_.begin() + begin, face_order_.begin() + mid,
                   face_order_.begin() + end, [&](int fa, int fb) {
                     const double ca = centroids[fa][axis], cb = centroids[fb][axis];
                     return ca < cb || (ca == cb && fa < fb);
                   });
  const int left = build(begin, mid, centroids);
  const int right = build(mid, end, centroids);
  node.left = left;
  node.right = right;
  nodes_.push_back(node);
  return static_cast<int>(nodes_.size()) - 1;
}

double FaceBvh::box_dist_sq(const Node& n, const Eigen::Vector3d& p) const {
  const Eigen::Vector3d d = (n.lo - p).cwiseMax(0.0).cwiseMax(p - n.hi);
  return d.squaredNorm();
}

FaceProjection FaceBvh::nearest_face(const Eigen::Vector3d& p) const {
  FaceProjection best;
  double best_sq = std::numeric_limits<double>::infinity();

  // Depth-first, visiting the nearer child first; strict pruning keeps every
  // candidate whose bound equals the best distance, so index ties stay exact.
  std::vector<int> stack{root_};
  while (!stack.empty()) {
    const int ni = stack.back();
    stack.pop_back();
    const Node& node = nodes_[ni];
    if (box_dist_sq(node, p) > best_sq) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int f = face_order_[i];
        const TrianglePoint tp = closest_point_on_triangle(
            p, V_.row(F_(f, 0)), V_.row(F_(f, 1)), V_.row(F_(f, 2)));
        const double d = (p - tp.point).squaredNorm();
        if (d < best_sq || (d == best_sq && f < best.face)) {
          best_sq = d;
          best.face = f;
          best.bary = tp.bary;
          best.point = tp.point;
        }
      }
    } else {
      const double dl = box_dist_sq(nodes_[node.left], p);
      const double dr = box_dist_sq(nodes_[node.right], p);
      if (dl <= dr) {
        stack.push_back(node.right);
        stack.push_back(node.left);
      } else {
        stack.push_back(node.left);
        stack.push_back(node.right);
      }
    }
  }
  best.distance = std::sqrt(best_sq);
  return best;
}

FaceProjection nearest_face_projection(const Eigen::Vector3d& p, const Mesh& mesh) {
  return FaceBvh(mesh).nearest_face(p);
}

// ---- PointKdTree ------------------------------------------------------------

PointKdTree::PointKdTree(const Eigen::MatrixXd& points) : points_(points) {
  if (points_.rows() == 0) throw InvalidInput("k-d tree over empty point set");
  order_.resize(points_.rows());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * points_.rows());
  root_ = build(0, static_cast<int>(points_.rows()));
}

int PointKdTree::build(int begin, int end) {
  Node node;
  node.lo.setConstant(std::numeric_limits<double>::infinity());
  node.hi.setConstant(-std::numeric_limits<double>::infinity());
  for (int i = begin; i < end; ++i) {
    node.lo = node.lo.cwiseMin(points_.row(order_[i]).transpose());
    node.hi = node.hi.cwiseMax(points_.row(order_[i]).transpose());
  }

  constexpr int kLeafSize = 8;
  if (end - begin <= kLeafSize) {
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int axis = 0;
  (node.hi - node.lo).maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double ca = points_(a, axis), cb = points_(b, axis);
                     return ca < cb || (ca == cb && a < b);
                   });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  node.left = left;
  node.right = right;
  nodes_.push_back(node);
  return static_cast<int>(nodes_.size()) - 1;
}

double PointKdTree::box_dist_sq(const Node& n, const Eigen::Vector3d& p) const {
  const Eigen::Vector3d d = (n.lo - p).cwiseMax(0.0).cwiseMax(p - n.hi);
  return d.squaredNorm();
}

int PointKdTree::nearest(const Eigen::Vector3d& p) const {
  int best = -1;
  double best_sq = std::numeric_limits<double>::infinity();
  std::vector<int> stack{root_};
  while (!stack.empty()) {
    const int ni = stack.back();
    stack.pop_back();
    const Node& node = nodes_[ni];
    if (box_dist_sq(node, p) > best_sq) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int idx = order_[i];
        const double d = (points_.row(idx).transpose() - p).squaredNorm();
        if (d < best_sq || (d == best_sq && idx < best)) {
          best_sq = d;
          best = idx;
        }
      }
    } else {
      const double dl = box_dist_sq(nodes_[node.left], p);
      const double dr = box_dist_sq(nodes_[node.right], p);
      if (dl <= dr) {
        stack.push_back(node.right);
        stack.push_back(node.left);
      } else {
        stack.push_back(node.left);
        stack.push_back(node.right);
      }
    }
  }
  return best;
}

std::vector<int> PointKdTree::knearest(const Eigen::Vector3d& p, int k) const {
  if (k < 1 || k > size())
    throw InvalidInput("knearest: k = " + std::to_string(k) + " out of range [1, " +
                       std::to_string(size()) + "]");
  using Entry = std::pair<double, int>;  // (squared distance, index)
  auto worse = [](const Entry& a, const Entry& b) {
    return a.first < b.first || (a.first == b.first && a.second < b.second);
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);

  std::vector<int> stack{root_};
  while (!stack.empty()) {
    const int ni = stack.back();
    stack.pop_back();
    const Node& node = nodes_[ni];
    if (static_cast<int>(heap.size()) == k && box_dist_sq(node, p) > heap.top().first) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int idx = order_[i];
        const Entry e{(points_.row(idx).transpose() - p).squaredNorm(), idx};
        if (static_cast<int>(heap.size()) < k) {
          heap.push(e);
        } else if (worse(e, heap.top())) {
          heap.pop();
          heap.push(e);
        }
      }
    } else {
      const double dl = box_dist_sq(nodes_[node.left], p);
      const double dr = box_dist_sq(nodes_[node.right], p);
      if (dl <= dr) {
        stack.push_back(node.right);
        stack.push_back(node.left);
      } else {
        stack.push_back(node.left);
        stack.push_back(node.right);
      }
    }
  }

  std::vector<Entry> entries;
  entries.reserve(heap.size());
  while (!heap.empty()) {
    entries.push_back(heap.top());
    heap.pop();
  }
  std::sort(entries.begin(), entries.end());
  std::vector<int> out(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) out[i] = entries[i].second;
  return out;
}

std::vector<int> PointKdTree::radius(const Eigen::Vector3d& p, double radius) const {
  const double r_sq = radius * radius;
  std::vector<std::pair<double, int>> hits;
  std::vector<int> stack{root_};
  while (!stack.empty()) {
    const int ni = stack.back();
    stack.pop_back();
    const Node& node = nodes_[ni];
    if (box_dist_sq(node, p) > r_sq) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int idx = order_[i];
        const double d = (points_.row(idx).transpose() - p).squaredNorm();
        if (d <= r_sq) hits.emplace_back(d, idx);
      }
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  std::sort(hits.begin(), hits.end());
  std::vector<int> out(hits.size());
  for (std::size_t i = 0; i < hits.size(); ++i) out[i] = hits[i].second;
  return out;
}

}  // namespace garment
