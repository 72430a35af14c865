#include "garment/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "garment/errors.hpp"
#include "garment/io_util.hpp"
#include "garment/neural.hpp"
#include "garment/obj_io.hpp"
#include "garment/skinning.hpp"

namespace garment {

namespace {

constexpr double kPi = std::numbers::pi;

// Joint layout: 0 root (pelvis), 1 left hip, 2 right hip.
constexpr double kHipY = 0.95;
constexpr double kHipX = 0.1;
constexpr double kLegRadius = 0.07;
constexpr double kLegBottomY = 0.10;

struct MeshBuilder {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Eigen::Vector3i> faces;

  int add_vertex(const Eigen::Vector3d& p) {
    vertices.push_back(p);
    return static_cast<int>(vertices.size()) - 1;
  }
  void add_face(int a, int b, int c) { faces.emplace_back(a, b, c); }
  void append(const MeshBuilder& other) {
    const int offset = static_cast<int>(vertices.size());
    vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
    for (const Eigen::Vector3i& f : other.faces) faces.emplace_back(f.x() + offset, f.y() + offset, f.z() + offset);
  }
  Mesh mesh() const {
    Mesh m;
    m.V.resize(static_cast<Eigen::Index>(vertices.size()), 3);
    for (std::size_t i = 0; i < vertices.size(); ++i) m.V.row(static_cast<Eigen::Index>(i)) = vertices[i].transpose();
    m.F.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t i = 0; i < faces.size(); ++i) m.F.row(static_cast<Eigen::Index>(i)) = faces[i].transpose();
    return m;
  }
};

// Vertical capsule: hemispherical caps at top_y and bottom_y around (cx, cz).
MeshBuilder make_capsule(double cx, double cz, double top_y, double bottom_y, double radius, int segments,
                         int cap_rings, int side_rings) {
  MeshBuilder b;
  std::vector<std::vector<int>> rings;

  auto add_ring = [&](double y, double r) {
    std::vector<int> ring;
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * kPi * s / segments;
      ring.push_back(b.add_vertex({cx + r * std::cos(phi), y, cz + r * std::sin(phi)}));
    }
    rings.push_back(std::move(ring));
  };

  const int top_pole = b.add_vertex({cx, top_y + radius, cz});
  for (int i = 1; i <= cap_rings; ++i) {
    const double a = 0.5 * kPi * i / (cap_rings + 1);
    add_ring(top_y + radius * std::cos(a), radius * std::sin(a));
  }
  for (int i = 0; i <= side_rings; ++i)
    add_ring(top_y - (top_y - bottom_y) * i / side_rings, radius);
  for (int i = cap_rings; i >= 1; --i) {
    const double a = 0.5 * kPi * i / (cap_rings + 1);
    add_ring(bottom_y - radius * std::cos(a), radius * std::sin(a));
  }
  const int bottom_pole = b.add_vertex({cx, bottom_y - radius, cz});

  for (int s = 0; s < segments; ++s)
    b.add_face(top_pole, rings.front()[(s + 1) % segments], rings.front()[s]);
  for (std::size_t r = 0; r + 1 < rings.size(); ++r)
    for (int s = 0; s < segments; ++s) {
      const int s1 = (s + 1) % segments;
      b.add_face(rings[r][s], rings[r][s1], rings[r + 1][s]);
      b.add_face(rings[r][s1], rings[r + 1][s1], rings[r + 1][s]);
    }
  for (int s = 0; s < segments; ++s)
    b.add_face(bottom_pole, rings.back()[s], rings.back()[(s + 1) % segments]);
  return b;
}

MeshBuilder make_box(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  MeshBuilder b;
  for (int i = 0; i < 8; ++i)
    b.add_vertex({i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(), i & 4 ? hi.z() : lo.z()});
  const int quads[6][4] = {
      {0, 2, 3, 1},  // z = lo (normal -z)
      {4, 5, 7, 6},  // z = hi
      {0, 1, 5, 4},  // y = lo
      {2, 6, 7, 3},  // y = hi
      {0, 4, 6, 2},  // x = lo
      {1, 3, 7, 5},  // x = hi
  };
  for (const auto& q : quads) {
    b.add_face(q[0], q[1], q[2]);
    b.add_face(q[0], q[2], q[3]);
  }
  return b;
}

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

Skeleton make_body() {
  Skeleton skeleton;
  skeleton.joint_rest_positions.resize(3, 3);
  skeleton.joint_rest_positions << 0.0, 1.0, 0.0, -kHipX, kHipY, 0.0, kHipX, kHipY, 0.0;
  skeleton.parents = {-1, 0, 0};
  skeleton.joint_names = {"root", "hip_l", "hip_r"};

  MeshBuilder body = make_capsule(-kHipX, 0.0, kHipY, kLegBottomY, kLegRadius, 16, 3, 8);
  const int left_count = static_cast<int>(body.vertices.size());
  body.append(make_capsule(kHipX, 0.0, kHipY, kLegBottomY, kLegRadius, 16, 3, 8));
  const int right_count = static_cast<int>(body.vertices.size());
  body.append(make_box({-0.18, 0.93, -0.10}, {0.18, 1.05, 0.10}));
  skeleton.body_mesh = body.mesh();

  const Eigen::Index n = skeleton.body_mesh.V.rows();
  skeleton.body_weights = SkinningWeights::Zero(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = skeleton.body_mesh.V(i, 1);
    const int hip = i < left_count ? 1 : (i < right_count ? 2 : -1);
    if (hip == -1) {
      skeleton.body_weights(i, 0) = 1.0;
    } else {
      const double w = smoothstep((kHipY - y) / 0.12);
      skeleton.body_weights(i, hip) = w;
      skeleton.body_weights(i, 0) = 1.0 - w;
    }
  }
  return skeleton;
}

}  // namespace

Mesh make_tube_skirt(int segments, int rings, double waist_y, double hem_y, double waist_radius, double hem_radius) {
  if (segments < 3 || rings < 2) throw InvalidInput("tube skirt needs >= 3 segments and >= 2 rings");
  if (!(waist_y > hem_y)) throw InvalidInput("tube skirt waist must sit above the hem");
  MeshBuilder b;
  for (int r = 0; r < rings; ++r) {
    const double u = static_cast<double>(r) / (rings - 1);
    const double y = waist_y + (hem_y - waist_y) * u;
    const double radius = waist_radius + (hem_radius - waist_radius) * u;
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * kPi * s / segments;
      b.add_vertex({radius * std::cos(phi), y, radius * std::sin(phi)});
    }
  }
  for (int r = 0; r + 1 < rings; ++r)
    for (int s = 0; s < segments; ++s) {
      const int s1 = (s + 1) % segments;
      const int i00 = r * segments + s, i01 = r * segments + s1;
      const int i10 = (r + 1) * segments + s, i11 = (r + 1) * segments + s1;
      b.add_face(i00, i01, i10);
      b.add_face(i01, i11, i10);
    }
  return b.mesh();
}

Eigen::MatrixXd sample_mesh_surface(const Mesh& mesh, int count, std::mt19937_64& rng) {
  validate_mesh(mesh);
  if (mesh.face_count() == 0 || count < 0) throw InvalidInput("sample_mesh_surface: nothing to sample");
  std::vector<double> areas(static_cast<std::size_t>(mesh.face_count()));
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Eigen::Vector3d a = mesh.V.row(mesh.F(f, 0)), b = mesh.V.row(mesh.F(f, 1)), c = mesh.V.row(mesh.F(f, 2));
    areas[static_cast<std::size_t>(f)] = 0.5 * (b - a).cross(c - a).norm();
  }
  std::discrete_distribution<int> pick_face(areas.begin(), areas.end());
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Eigen::MatrixXd points(count, 3);
  for (int i = 0; i < count; ++i) {
    const int f = pick_face(rng);
    double u = uni(rng), v = uni(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    points.row(i) = (1.0 - u - v) * mesh.V.row(mesh.F(f, 0)) + u * mesh.V.row(mesh.F(f, 1)) +
                    v * mesh.V.row(mesh.F(f, 2));
  }
  return points;
}

SyntheticScene build_synthetic_scene(const SynthConfig& config) {
  if (!(config.incompleteness >= 0.0 && config.incompleteness < 1.0))
    throw InvalidInput("incompleteness must lie in [0, 1)");
  if (!(config.label_error_rate >= 0.0 && config.label_error_rate < 1.0))
    throw InvalidInput("label error rate must lie in [0, 1)");
  if (config.frames < 1) throw InvalidInput("need at least one frame");
  if (config.points_per_frame < 2) throw InvalidInput("need at least two cloud points per frame");
  if (config.variants < 2) throw InvalidInput("need at least two shape variants");
  if (!(config.fps > 0.0)) throw InvalidInput("fps must be positive");

  std::mt19937_64 rng(config.seed);
  SyntheticScene scene;
  scene.skeleton = make_body();
  validate_skeleton(scene.skeleton);

  scene.template_garment = make_tube_skirt(24, 10, 1.0, 0.45, 0.21, 0.25);
  scene.template_labels = {{"waist", {0, 1}}, {"hem", {24 * 9, 24 * 9 + 1}}};
  scene.source_garment = make_tube_skirt(30, 12, 1.0, 0.40, 0.215, 0.27);
  scene.source_labels = {{"waist", {0, 1}}, {"hem", {30 * 11, 30 * 11 + 1}}};

  scene.poses.fps = config.fps;
  for (int t = 0; t < config.frames; ++t) {
    const double phase = 2.0 * kPi * t / config.frames;
    Pose pose;
    pose.theta = Eigen::MatrixXd::Zero(3, 3);
    pose.theta(1, 2) = config.swing_amplitude * std::sin(phase);
    pose.theta(2, 2) = -config.swing_amplitude * std::sin(phase);
    pose.root_translation = {0.02 * std::sin(phase), 0.0, 0.0};
    scene.poses.frames.push_back(std::move(pose));
  }

  // The source garment follows the body through interpolated rest-pose
  // weights; this is the scene's ground-truth motion, not the module under
  // test.
  WeightInterpolationConfig wcfg;
  wcfg.k = std::min<int>(48, scene.skeleton.body_mesh.vertex_count());
  const SkinningWeights source_weights =
      interpolate_skinning_weights(scene.source_garment.V, scene.skeleton, wcfg, scene.source_garment);
  for (const Pose& pose : scene.poses.frames) {
    const std::vector<RigidTransform> transforms = pose_skeleton(scene.skeleton, pose);
    Mesh frame = scene.source_garment;
    frame.V = linear_blend_skin(scene.source_garment.V, source_weights, transforms);
    scene.source_frames.push_back(std::move(frame));
    Mesh body = scene.skeleton.body_mesh;
    body.V = linear_blend_skin(scene.skeleton.body_mesh.V, scene.skeleton.body_weights, transforms);
    scene.posed_bodies.push_back(std::move(body));
  }

  const int body_points = config.points_per_frame / 2;
  const int garment_points = config.points_per_frame - body_points;
  for (int t = 0; t < config.frames; ++t) {
    Eigen::MatrixXd points(config.points_per_frame, 3);
    points.topRows(body_points) = sample_mesh_surface(scene.posed_bodies[static_cast<std::size_t>(t)], body_points, rng);
    points.bottomRows(garment_points) =
        sample_mesh_surface(scene.source_frames[static_cast<std::size_t>(t)], garment_points, rng);
    std::vector<int> labels(static_cast<std::size_t>(config.points_per_frame), 0);
    std::fill(labels.begin() + body_points, labels.end(), 1);

    // Crop spherical holes until the requested count is gone; the final hole
    // is truncated (lowest indices kept removed) to hit the target exactly.
    const int target_removed = static_cast<int>(std::lround(config.incompleteness * config.points_per_frame));
    std::vector<bool> removed(static_cast<std::size_t>(config.points_per_frame), false);
    int removed_count = 0;
    const double diag = bounding_box_diagonal(scene.posed_bodies[static_cast<std::size_t>(t)]);
    std::uniform_int_distribution<int> pick_point(0, config.points_per_frame - 1);
    std::uniform_real_distribution<double> pick_radius(0.05 * diag, 0.12 * diag);
    while (removed_count < target_removed) {
      const Eigen::RowVector3d center = points.row(pick_point(rng));
      const double radius_sq = std::pow(pick_radius(rng), 2);
      for (int i = 0; i < config.points_per_frame && removed_count < target_removed; ++i) {
        if (removed[static_cast<std::size_t>(i)]) continue;
        if ((points.row(i) - center).squaredNorm() <= radius_sq) {
          removed[static_cast<std::size_t>(i)] = true;
          ++removed_count;
        }
      }
    }
    Eigen::MatrixXd kept(config.points_per_frame - removed_count, 3);
    std::vector<int> kept_labels;
    kept_labels.reserve(static_cast<std::size_t>(kept.rows()));
    Eigen::Index at = 0;
    for (int i = 0; i < config.points_per_frame; ++i) {
      if (removed[static_cast<std::size_t>(i)]) continue;
      kept.row(at++) = points.row(i);
      kept_labels.push_back(labels[static_cast<std::size_t>(i)]);
    }

    const int flips = static_cast<int>(std::lround(config.label_error_rate * static_cast<double>(kept.rows())));
    std::vector<int> indices(kept_labels.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<int>(i);
    std::vector<int> flip_at;
    std::sample(indices.begin(), indices.end(), std::back_inserter(flip_at), flips, rng);
    for (int i : flip_at) kept_labels[static_cast<std::size_t>(i)] = 1 - kept_labels[static_cast<std::size_t>(i)];

    scene.cloud_points.push_back(std::move(kept));
    scene.cloud_labels.push_back(std::move(kept_labels));
  }

  // Base parameters give 5 affine degrees of freedom; the harmonic radius
  // perturbations add independent directions per variant so the family's
  // numerical rank comfortably exceeds the default component count.
  std::uniform_real_distribution<double> waist_r(0.19, 0.23);
  std::uniform_real_distribution<double> flare(0.02, 0.08);
  std::uniform_real_distribution<double> hem_y(0.38, 0.52);
  std::uniform_real_distribution<double> x_scale(0.9, 1.1);
  std::uniform_real_distribution<double> harmonic(-0.008, 0.008);
  const int segments = 24, rings = 10;
  for (int v = 0; v < config.variants; ++v) {
    const double wr = waist_r(rng);
    Mesh variant = make_tube_skirt(segments, rings, 1.0, hem_y(rng), wr, wr + flare(rng));
    double c[6];
    for (double& ck : c) ck = harmonic(rng);
    for (Eigen::Index i = 0; i < variant.V.rows(); ++i) {
      const double u = static_cast<double>(i / segments) / (rings - 1);
      const double phi = 2.0 * kPi * static_cast<double>(i % segments) / segments;
      const double dr = c[0] * std::sin(phi) * u + c[1] * std::cos(2.0 * phi) * u +
                        c[2] * std::sin(3.0 * phi) * (1.0 - u) + c[3] * std::cos(phi) * (1.0 - u) +
                        c[4] * std::sin(2.0 * phi) * u * (1.0 - u) + c[5] * std::cos(3.0 * phi) * u * u;
      variant.V(i, 0) += dr * std::cos(phi);
      variant.V(i, 2) += dr * std::sin(phi);
    }
    variant.V.col(0) *= x_scale(rng);
    scene.variants.push_back(std::move(variant));
  }
  return scene;
}

void save_point_cloud(const std::filesystem::path& path, const Eigen::MatrixXd& points,
                      const std::vector<int>& labels) {
  if (points.rows() != static_cast<Eigen::Index>(labels.size()))
    throw InvalidInput("point cloud labels do not match point count");
  std::string out;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out += format_double(points(i, 0));
    out += ' ';
    out += format_double(points(i, 1));
    out += ' ';
    out += format_double(points(i, 2));
    out += ' ';
    out += std::to_string(labels[static_cast<std::size_t>(i)]);
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::pair<Eigen::MatrixXd, std::vector<int>> load_point_cloud(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<Eigen::Vector3d> points;
  std::vector<int> labels;
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    Eigen::Vector3d p;
    int label;
    if (!(fields >> p.x() >> p.y() >> p.z() >> label))
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": expected 'x y z label'");
    points.push_back(p);
    labels.push_back(label);
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
  return {std::move(m), std::move(labels)};
}

Eigen::MatrixXd select_labeled_points(const Eigen::MatrixXd& points, const std::vector<int>& labels, int label) {
  if (points.rows() != static_cast<Eigen::Index>(labels.size()))
    throw InvalidInput("point cloud labels do not match point count");
  Eigen::Index count = 0;
  for (int l : labels)
    if (l == label) ++count;
  Eigen::MatrixXd out(count, 3);
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    if (labels[static_cast<std::size_t>(i)] == label) out.row(at++) = points.row(i);
  return out;
}

std::string frame_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04d.obj", index);
  return buf;
}

std::string cloud_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04d.txt", index);
  return buf;
}

std::string variant_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "variant_%02d.obj", index);
  return buf;
}

namespace {

void write_labels_json(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, std::vector<int>>>& labels) {
  nlohmann::json j;
  for (const auto& [label, seeds] : labels) j[label] = seeds;
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace

void write_synthetic_scene(const std::filesystem::path& dir, const SyntheticScene& scene,
                           const RefinerConfig& refiner, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_skeleton(dir / "skeleton.json", scene.skeleton, "body.obj", "body_weights.bin");
  save_obj(dir / "template.obj", scene.template_garment);
  write_labels_json(dir / "template_boundaries.json", scene.template_labels);
  save_obj(dir / "source_rest.obj", scene.source_garment);
  write_labels_json(dir / "source_boundaries.json", scene.source_labels);
  save_pose_sequence(dir / "poses.json", scene.poses);
  for (std::size_t t = 0; t < scene.source_frames.size(); ++t) {
    save_obj(dir / "source" / frame_file_name(static_cast<int>(t)), scene.source_frames[t]);
    save_obj(dir / "body_posed" / frame_file_name(static_cast<int>(t)), scene.posed_bodies[t]);
    save_point_cloud(dir / "clouds" / cloud_file_name(static_cast<int>(t)), scene.cloud_points[t],
                     scene.cloud_labels[t]);
  }
  for (std::size_t v = 0; v < scene.variants.size(); ++v)
    save_obj(dir / "variants" / variant_file_name(static_cast<int>(v)), scene.variants[v]);
  save_tensors(dir / "refiner_weights.bin", init_refiner_weights(refiner, seed));
}

}  // namespace garment
