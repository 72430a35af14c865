#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "garment/errors.hpp"
#include "garment/io_util.hpp"
#include "garment/spatial.hpp"
#include "garment/synth.hpp"
#include "test_support.hpp"

using garment::Mesh;

namespace {

garment::SynthConfig small_config() {
  garment::SynthConfig cfg;
  cfg.seed = 11;
  cfg.frames = 3;
  cfg.points_per_frame = 400;
  cfg.variants = 6;
  return cfg;
}

std::vector<std::filesystem::path> sorted_tree(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("tube skirt dimensions and ring layout") {
  const Mesh skirt = garment::make_tube_skirt(12, 5, 0.0, -0.8, 0.3, 0.5);
  CHECK(skirt.V.rows() == 60);
  CHECK(skirt.F.rows() == 12 * 4 * 2);
  // Ring 0 sits at the waist, the last ring at the hem.
  for (int s = 0; s < 12; ++s) {
    CHECK(skirt.V(s, 1) == 0.0);
    CHECK(skirt.V(4 * 12 + s, 1) == -0.8);
  }
  for (int s = 0; s < 12; ++s) {
    const double waist_r = std::hypot(skirt.V(s, 0), skirt.V(s, 2));
    const double hem_r = std::hypot(skirt.V(4 * 12 + s, 0), skirt.V(4 * 12 + s, 2));
    CHECK(waist_r == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(hem_r == doctest::Approx(0.5).epsilon(1e-12));
  }
  CHECK_NOTHROW(garment::validate_mesh(skirt));
}

TEST_CASE("scene shape: skeleton tree, frame counts, label seeds") {
  const garment::SynthConfig cfg = small_config();
  const garment::SyntheticScene scene = garment::build_synthetic_scene(cfg);

  CHECK(scene.skeleton.joint_count() == 3);
  CHECK(scene.skeleton.parents == std::vector<int>{-1, 0, 0});
  CHECK_NOTHROW(garment::validate_skeleton(scene.skeleton));
  for (Eigen::Index i = 0; i < scene.skeleton.body_weights.rows(); ++i)
    CHECK(scene.skeleton.body_weights.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));

  CHECK(scene.poses.frames.size() == 3);
  CHECK(scene.source_frames.size() == 3);
  CHECK(scene.posed_bodies.size() == 3);
  CHECK(scene.cloud_points.size() == 3);
  CHECK(scene.cloud_labels.size() == 3);
  CHECK(scene.variants.size() == 6);

  // Frame 0 is the rest pose: the posed source equals the rest garment.
  CHECK(scene.poses.frames[0].theta.cwiseAbs().maxCoeff() == 0.0);
  CHECK(support::max_abs_diff(scene.source_frames[0].V, scene.source_garment.V) < 1e-12);

  // Both garments carry waist and hem loop seeds.
  for (const auto* labels : {&scene.template_labels, &scene.source_labels}) {
    REQUIRE(labels->size() == 2);
    CHECK((*labels)[0].first == "waist");
    CHECK((*labels)[1].first == "hem");
  }

  // The skirt hangs downward.
  CHECK(scene.source_garment.V.col(1).minCoeff() < scene.source_garment.V.col(1).maxCoeff() - 0.1);
  for (const Mesh& variant : scene.variants) CHECK(garment::same_topology(variant, scene.template_garment));
}

TEST_CASE("cloud counts are exact for whole-fraction incompleteness") {
  garment::SynthConfig cfg = small_config();
  const garment::SyntheticScene full = garment::build_synthetic_scene(cfg);
  for (const auto& cloud : full.cloud_points) CHECK(cloud.rows() == 400);
  for (const auto& labels : full.cloud_labels) CHECK(labels.size() == 400);

  cfg.incompleteness = 0.5;
  const garment::SyntheticScene half = garment::build_synthetic_scene(cfg);
  for (const auto& cloud : half.cloud_points) CHECK(cloud.rows() == 200);

  cfg.incompleteness = 0.25;
  const garment::SyntheticScene quarter = garment::build_synthetic_scene(cfg);
  for (const auto& cloud : quarter.cloud_points) CHECK(cloud.rows() == 300);
}

TEST_CASE("truthful garment labels land on the garment surface") {
  const garment::SyntheticScene scene = garment::build_synthetic_scene(small_config());
  for (std::size_t t = 0; t < scene.cloud_points.size(); ++t) {
    const garment::FaceBvh garment_bvh(scene.source_frames[t]);
    const garment::FaceBvh body_bvh(scene.posed_bodies[t]);
    int garment_count = 0;
    for (Eigen::Index i = 0; i < scene.cloud_points[t].rows(); ++i) {
      const Eigen::Vector3d p = scene.cloud_points[t].row(i).transpose();
      if (scene.cloud_labels[t][static_cast<std::size_t>(i)] == 1) {
        CHECK(garment_bvh.nearest_face(p).distance < 1e-9);
        ++garment_count;
      } else {
        CHECK(body_bvh.nearest_face(p).distance < 1e-9);
      }
    }
    CHECK(garment_count > 0);
    CHECK(garment_count < scene.cloud_points[t].rows());
  }
}

TEST_CASE("label noise flips exactly the rounded fraction") {
  garment::SynthConfig cfg = small_config();
  const garment::SyntheticScene clean = garment::build_synthetic_scene(cfg);
  cfg.label_error_rate = 0.25;
  const garment::SyntheticScene noisy = garment::build_synthetic_scene(cfg);

  // The random stream draws points before labels, so frame 0's coordinates
  // agree bitwise across the two runs.
  CHECK(support::max_abs_diff(clean.cloud_points[0], noisy.cloud_points[0]) == 0.0);
  int flipped = 0;
  for (std::size_t i = 0; i < clean.cloud_labels[0].size(); ++i)
    if (clean.cloud_labels[0][i] != noisy.cloud_labels[0][i]) ++flipped;
  CHECK(flipped == 100);  // 0.25 * 400
}

TEST_CASE("configs outside the supported ranges are rejected") {
  garment::SynthConfig cfg = small_config();
  cfg.incompleteness = 1.0;
  CHECK_THROWS_AS(garment::build_synthetic_scene(cfg), garment::InvalidInput);
  cfg = small_config();
  cfg.label_error_rate = -0.1;
  CHECK_THROWS_AS(garment::build_synthetic_scene(cfg), garment::InvalidInput);
  cfg = small_config();
  cfg.frames = 0;
  CHECK_THROWS_AS(garment::build_synthetic_scene(cfg), garment::InvalidInput);
  cfg = small_config();
  cfg.variants = 1;
  CHECK_THROWS_AS(garment::build_synthetic_scene(cfg), garment::InvalidInput);
  cfg = small_config();
  cfg.fps = 0.0;
  CHECK_THROWS_AS(garment::build_synthetic_scene(cfg), garment::InvalidInput);
}

TEST_CASE("point cloud files round trip") {
  support::TempDir dir;
  const Eigen::MatrixXd points = support::random_points(40, 44, 0.9);
  std::vector<int> labels(40);
  for (int i = 0; i < 40; ++i) labels[static_cast<std::size_t>(i)] = i % 2;
  const auto path = dir / "cloud.txt";
  garment::save_point_cloud(path, points, labels);
  const auto [loaded, loaded_labels] = garment::load_point_cloud(path);
  CHECK(support::max_abs_diff(loaded, points) == 0.0);
  CHECK(loaded_labels == labels);

  const Eigen::MatrixXd garment_only = garment::select_labeled_points(points, labels, 1);
  CHECK(garment_only.rows() == 20);
  CHECK(garment_only.row(0) == points.row(1));
}

TEST_CASE("same seed writes a byte-identical scene tree") {
  const garment::SynthConfig cfg = small_config();
  garment::RefinerConfig refiner;
  refiner.radii = {0.1, 0.2};
  refiner.max_samples = {8, 16};
  refiner.gcn_hidden = {16, 8};

  support::TempDir a, b;
  garment::write_synthetic_scene(a.path(), garment::build_synthetic_scene(cfg), refiner, 99);
  garment::write_synthetic_scene(b.path(), garment::build_synthetic_scene(cfg), refiner, 99);

  const auto files_a = sorted_tree(a.path());
  const auto files_b = sorted_tree(b.path());
  REQUIRE(files_a.size() == files_b.size());
  REQUIRE(!files_a.empty());
  for (std::size_t i = 0; i < files_a.size(); ++i) {
    CHECK(files_a[i].lexically_relative(a.path()) == files_b[i].lexically_relative(b.path()));
    CHECK(garment::read_file(files_a[i]) == garment::read_file(files_b[i]));
  }

  // The expected artifact layout is present.
  CHECK(std::filesystem::exists(a / "skeleton.json"));
  CHECK(std::filesystem::exists(a / "template.obj"));
  CHECK(std::filesystem::exists(a / "template_boundaries.json"));
  CHECK(std::filesystem::exists(a / "source" / "frame_0000.obj"));
  CHECK(std::filesystem::exists(a / "source_boundaries.json"));
  CHECK(std::filesystem::exists(a / "poses.json"));
  CHECK(std::filesystem::exists(a / "body_posed" / "frame_0000.obj"));
  CHECK(std::filesystem::exists(a / "clouds" / "frame_0002.txt"));
  CHECK(std::filesystem::exists(a / "variants" / "variant_05.obj"));
  CHECK(std::filesystem::exists(a / "refiner_weights.bin"));
}

TEST_CASE("artifact file names are zero padded") {
  CHECK(garment::frame_file_name(7) == "frame_0007.obj");
  CHECK(garment::frame_file_name(0) == "frame_0000.obj");
  CHECK(garment::cloud_file_name(12) == "frame_0012.txt");
  CHECK(garment::variant_file_name(3) == "variant_03.obj");
}

}  // TEST_SUITE
