#include <doctest.h>

#include <numbers>
#include <random>

#include "garment/errors.hpp"
#include "garment/shape_space.hpp"
#include "garment/skinning.hpp"
#include "garment/synth.hpp"
#include "test_support.hpp"

using garment::Mesh;
using garment::Pose;
using garment::RigidTransform;
using garment::Skeleton;

namespace {

// Small two-joint scene: a body made of two grids, one per joint.
Skeleton split_body() {
  Skeleton s;
  s.joint_rest_positions.resize(2, 3);
  s.joint_rest_positions << -0.5, 0, 0, 0.5, 0, 0;
  s.parents = {-1, 0};
  s.joint_names = {"left", "right"};

  Mesh left = support::grid_mesh(4, 4, 0.2);
  left.V.col(0).array() -= 1.0;
  Mesh right = support::grid_mesh(4, 4, 0.2);
  right.V.col(0).array() += 0.6;
  s.body_mesh.V.resize(32, 3);
  s.body_mesh.V << left.V, right.V;
  s.body_mesh.F.resize(left.F.rows() + right.F.rows(), 3);
  s.body_mesh.F << left.F, (right.F.array() + 16);

  s.body_weights = Eigen::MatrixXd::Zero(32, 2);
  for (int i = 0; i < 16; ++i) s.body_weights(i, 0) = 1.0;
  for (int i = 16; i < 32; ++i) s.body_weights(i, 1) = 1.0;
  return s;
}

std::vector<RigidTransform> identity_transforms(int n) {
  return std::vector<RigidTransform>(static_cast<std::size_t>(n));
}

}  // namespace

TEST_SUITE("skinning") {

TEST_CASE("identity transforms reproduce the input") {
  const Eigen::MatrixXd V = support::random_points(40, 3);
  Eigen::MatrixXd W(40, 2);
  W.setConstant(0.5);
  CHECK(support::max_abs_diff(garment::linear_blend_skin(V, W, identity_transforms(2)), V) == 0.0);
}

TEST_CASE("one-hot weights apply a rigid transform and preserve edge lengths") {
  const Mesh mesh = support::jittered_grid(5, 5, 0.25, 33, 0.04);
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(mesh.V.rows(), 1);
  W.col(0).setOnes();
  RigidTransform rigid;
  rigid.R = support::rodrigues_closed_form(Eigen::Vector3d(0.4, -0.2, 0.9));
  rigid.t << 0.3, 1.0, -0.2;
  const Eigen::MatrixXd posed = garment::linear_blend_skin(mesh.V, W, {rigid});

  const Eigen::VectorXd before = garment::edge_lengths(mesh);
  Mesh after = mesh;
  after.V = posed;
  CHECK(support::max_abs_diff(garment::edge_lengths(after), before) < 1e-9);
}

TEST_CASE("half-and-half weights between identity and a translation give half the shift") {
  const Eigen::MatrixXd V = support::random_points(25, 4);
  Eigen::MatrixXd W(25, 2);
  W.setConstant(0.5);
  RigidTransform shift;
  shift.t << 1.0, -2.0, 0.5;
  const Eigen::MatrixXd posed = garment::linear_blend_skin(V, W, {RigidTransform(), shift});
  CHECK(support::max_abs_diff(posed, V.rowwise() + 0.5 * shift.t.transpose()) < 1e-15);
}

TEST_CASE("dimension mismatches are rejected") {
  const Eigen::MatrixXd V = support::random_points(10, 5);
  Eigen::MatrixXd W = Eigen::MatrixXd::Ones(10, 2);
  W.col(1).setZero();
  CHECK_THROWS_AS(garment::linear_blend_skin(V, W, identity_transforms(1)), garment::InvalidInput);
  CHECK_THROWS_AS(garment::linear_blend_skin(V.topRows(5), W, identity_transforms(2)),
                  garment::InvalidInput);
}

TEST_CASE("K = 1 with no smoothing copies the nearest body row exactly") {
  const Skeleton s = split_body();
  const Eigen::MatrixXd garmentV = support::random_points(60, 6, 1.2);
  garment::WeightInterpolationConfig cfg;
  cfg.k = 1;
  cfg.smoothing_iterations = 0;
  const garment::SkinningWeights W =
      garment::interpolate_skinning_weights(garmentV, s, cfg, Mesh{});
  for (Eigen::Index i = 0; i < garmentV.rows(); ++i) {
    const int nearest = support::brute_nearest(s.body_mesh.V, garmentV.row(i).transpose());
    CHECK(support::max_abs_diff(W.row(i), s.body_weights.row(nearest)) == 0.0);
  }
}

TEST_CASE("a garment vertex on a body vertex copies that row for either exponent") {
  const Skeleton s = split_body();
  Eigen::MatrixXd garmentV(1, 3);
  garmentV.row(0) = s.body_mesh.V.row(20);
  for (int exponent : {1, 2}) {
    garment::WeightInterpolationConfig cfg;
    cfg.k = 8;
    cfg.distance_exponent = exponent;
    cfg.smoothing_iterations = 0;
    const garment::SkinningWeights W =
        garment::interpolate_skinning_weights(garmentV, s, cfg, Mesh{});
    CHECK(support::max_abs_diff(W.row(0), s.body_weights.row(20)) < 1e-6);
  }
}

TEST_CASE("two equidistant neighbors average their rows") {
  Skeleton s;
  s.joint_rest_positions.resize(2, 3);
  s.joint_rest_positions << 0, 0, 0, 1, 0, 0;
  s.parents = {-1, 0};
  s.joint_names = {"a", "b"};
  s.body_mesh.V.resize(3, 3);
  s.body_mesh.V << -1, 0, 0, 1, 0, 0, 0, 5, 0;  // third vertex far away
  s.body_mesh.F.resize(1, 3);
  s.body_mesh.F << 0, 1, 2;
  s.body_weights.resize(3, 2);
  s.body_weights << 1, 0, 0.2, 0.8, 0.5, 0.5;

  Eigen::MatrixXd garmentV(1, 3);
  garmentV << 0, 0.3, 0;  // equidistant from rows 0 and 1
  garment::WeightInterpolationConfig cfg;
  cfg.k = 2;
  cfg.smoothing_iterations = 0;
  const garment::SkinningWeights W = garment::interpolate_skinning_weights(garmentV, s, cfg, Mesh{});
  CHECK(support::max_abs_diff(W.row(0), 0.5 * (s.body_weights.row(0) + s.body_weights.row(1))) < 1e-9);
}

TEST_CASE("rows stay convex before and after smoothing for all K") {
  const garment::SyntheticScene scene = garment::build_synthetic_scene(garment::SynthConfig{});
  const Mesh& garment_mesh = scene.source_garment;
  for (int k : {1, 8, 64}) {
    for (int iters : {0, 10}) {
      garment::WeightInterpolationConfig cfg;
      cfg.k = k;
      cfg.smoothing_iterations = iters;
      const garment::SkinningWeights W =
          garment::interpolate_skinning_weights(garment_mesh.V, scene.skeleton, cfg, garment_mesh);
      REQUIRE(W.rows() == garment_mesh.V.rows());
      CHECK(W.minCoeff() >= 0.0);
      for (Eigen::Index i = 0; i < W.rows(); ++i)
        CHECK(W.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("interpolation is exact when all neighbors agree") {
  const Skeleton s = split_body();
  Eigen::MatrixXd garmentV(2, 3);
  garmentV.row(0) = s.body_mesh.V.row(3) + Eigen::RowVector3d(0.01, 0.02, 0.1);   // deep in joint-0 side
  garmentV.row(1) = s.body_mesh.V.row(20) + Eigen::RowVector3d(0.01, -0.01, 0.1); // deep in joint-1 side
  garment::WeightInterpolationConfig cfg;
  cfg.k = 4;
  cfg.smoothing_iterations = 0;
  const garment::SkinningWeights W = garment::interpolate_skinning_weights(garmentV, s, cfg, Mesh{});
  CHECK(support::max_abs_diff(W.row(0), Eigen::RowVector2d(1, 0)) == 0.0);
  CHECK(support::max_abs_diff(W.row(1), Eigen::RowVector2d(0, 1)) == 0.0);
}

TEST_CASE("K out of range and missing smoothing graph are rejected") {
  const Skeleton s = split_body();
  const Eigen::MatrixXd garmentV = support::random_points(5, 8);
  garment::WeightInterpolationConfig cfg;
  cfg.k = 0;
  CHECK_THROWS_AS(garment::interpolate_skinning_weights(garmentV, s, cfg, Mesh{}), garment::InvalidInput);
  cfg.k = 33;  // more than body vertices
  CHECK_THROWS_AS(garment::interpolate_skinning_weights(garmentV, s, cfg, Mesh{}), garment::InvalidInput);
  cfg.k = 4;
  cfg.smoothing_iterations = 2;  // smoothing needs the garment graph
  CHECK_THROWS_AS(garment::interpolate_skinning_weights(garmentV, s, cfg, Mesh{}), garment::InvalidInput);
}

TEST_CASE("zero pose skinning is the decoded garment") {
  const garment::SyntheticScene scene = garment::build_synthetic_scene(garment::SynthConfig{});
  const garment::ShapeSpace space = garment::fit_pca(scene.variants, 4);
  const Eigen::VectorXd alpha = garment::encode(space, scene.variants[0]);

  Pose rest;
  rest.theta = Eigen::MatrixXd::Zero(scene.skeleton.joint_count(), 3);
  garment::WeightInterpolationConfig cfg;
  cfg.k = 12;
  const Mesh posed = garment::skin_garment(space, alpha, scene.skeleton, rest, cfg);
  const Mesh decoded = garment::decode(space, alpha);
  CHECK(support::max_abs_diff(posed.V, decoded.V) < 1e-12);
  CHECK(posed.F == decoded.F);
}

TEST_CASE("a root-only rigid pose preserves pairwise garment distances") {
  const garment::SyntheticScene scene = garment::build_synthetic_scene(garment::SynthConfig{});
  const garment::ShapeSpace space = garment::fit_pca(scene.variants, 4);
  const Eigen::VectorXd alpha = garment::encode(space, scene.variants[1]);

  Pose rigid;
  rigid.theta = Eigen::MatrixXd::Zero(scene.skeleton.joint_count(), 3);
  rigid.theta.row(0) << 0.2, std::numbers::pi / 3.0, -0.1;
  rigid.root_translation << 0.4, -0.1, 0.25;
  garment::WeightInterpolationConfig cfg;
  cfg.k = 12;
  const Mesh posed = garment::skin_garment(space, alpha, scene.skeleton, rigid, cfg);
  const Mesh canonical = garment::decode(space, alpha);
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> pick(0, canonical.vertex_count() - 1);
  for (int trial = 0; trial < 200; ++trial) {
    const int a = pick(gen), b = pick(gen);
    const double before = (canonical.V.row(a) - canonical.V.row(b)).norm();
    const double after = (posed.V.row(a) - posed.V.row(b)).norm();
    CHECK(std::abs(after - before) < 1e-9);
  }
}

}  // TEST_SUITE
