#include <doctest.h>

#include <algorithm>
#include <random>

#include "garment/errors.hpp"
#include "garment/neural.hpp"
#include "garment/synth.hpp"
#include "test_support.hpp"

using garment::Mesh;

namespace {

garment::Mlp identity_mlp(Eigen::Index dim) {
  garment::Mlp mlp;
  mlp.W.push_back(Eigen::MatrixXd::Identity(dim, dim));
  mlp.b.push_back(Eigen::RowVectorXd::Zero(dim));
  return mlp;
}

// The small scene used by the refine tests.
struct RefineFixture {
  garment::RefinerConfig config;
  std::vector<Mesh> proposals;
  std::vector<garment::FeatureGrid> grids;
  std::vector<Mesh> bodies;
  garment::NeuralWeights weights;

  explicit RefineFixture(int frames, std::uint64_t seed) {
    config.iterations = 2;
    config.radii = {0.15, 0.3};
    config.max_samples = {8, 16};
    config.grid_feature_dim = 4;
    config.grid_mlp_hidden = {8};
    config.pool_mlp_hidden = {8};
    config.pool_feature_dim = 6;
    config.body_mlp_hidden = {8};
    config.body_feature_dim = 6;
    config.gcn_hidden = {16, 8};
    config.attention_dim = 4;
    weights = garment::init_refiner_weights(config, seed);
    for (int t = 0; t < frames; ++t) {
      Mesh frame = support::jittered_grid(5, 4, 0.2, seed + static_cast<std::uint64_t>(t), 0.02);
      frame.V.col(2).array() += 0.1;
      proposals.push_back(frame);
      grids.push_back(garment::build_feature_grid(
          support::random_points(80, seed + 50 + static_cast<std::uint64_t>(t), 0.6), config.radii,
          config.max_samples, weights));
      Mesh body = support::jittered_grid(6, 5, 0.2, seed + 100 + static_cast<std::uint64_t>(t), 0.02);
      bodies.push_back(body);
    }
  }
};

}  // namespace

TEST_SUITE("neural") {

TEST_CASE("ball query finds the center itself when centers equal points") {
  const Eigen::MatrixXd P = support::random_points(50, 3);
  const auto hits = garment::ball_query(P, P, 0.2, 4);
  REQUIRE(hits.size() == 50);
  for (int i = 0; i < 50; ++i) {
    REQUIRE(!hits[static_cast<std::size_t>(i)].empty());
    CHECK(hits[static_cast<std::size_t>(i)][0] == i);
  }
}

TEST_CASE("an isolated center falls back to the single global nearest point") {
  Eigen::MatrixXd points(3, 3);
  points << 0, 0, 0, 1, 0, 0, 2, 0, 0;
  Eigen::MatrixXd center(1, 3);
  center << 100, 0, 0;
  const auto hits = garment::ball_query(center, points, 0.5, 8);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0] == std::vector<int>{2});
}

TEST_CASE("ball query equals the exhaustive scan on random scenes") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const Eigen::MatrixXd points = support::random_points(500, seed);
    const Eigen::MatrixXd centers = support::random_points(100, seed + 9);
    for (double radius : {0.1, 0.35}) {
      for (int max_samples : {1, 7, 64}) {
        const auto got = garment::ball_query(centers, points, radius, max_samples);
        for (Eigen::Index c = 0; c < centers.rows(); ++c)
          CHECK(got[static_cast<std::size_t>(c)] ==
                support::brute_ball(points, centers.row(c).transpose(), radius, max_samples));
      }
    }
  }
}

TEST_CASE("ball query validates its inputs") {
  const Eigen::MatrixXd P = support::random_points(5, 4);
  CHECK_THROWS_AS(garment::ball_query(P, Eigen::MatrixXd(0, 3), 0.5, 4), garment::InvalidInput);
  CHECK_THROWS_AS(garment::ball_query(P, P, 0.0, 4), garment::InvalidInput);
  CHECK_THROWS_AS(garment::ball_query(P, P, 0.5, 0), garment::InvalidInput);
}

TEST_CASE("farthest point sampling starts at zero and spreads deterministically") {
  Eigen::MatrixXd points(4, 3);
  points << 0, 0, 0, 0.1, 0, 0, 5, 0, 0, 10, 0, 0;
  const auto picks = garment::farthest_point_indices(points, 3);
  CHECK(picks == std::vector<int>{0, 3, 2});
}

TEST_CASE("pooled features are invariant to permuting points within a level") {
  const Eigen::MatrixXd cloud = support::random_points(120, 8, 0.8);
  const std::vector<double> radii = {0.2, 0.5};
  const std::vector<int> max_samples = {4, 8};

  garment::FeatureGrid grid;
  grid.radii = radii;
  grid.max_samples = max_samples;
  grid.levels.resize(2);
  grid.levels[0].points = cloud;
  grid.levels[0].features = support::random_points(120, 9, 1.0);
  grid.levels[1].points = cloud.topRows(30);
  grid.levels[1].features = support::random_points(30, 10, 1.0);

  const Eigen::MatrixXd verts = support::random_points(25, 11, 0.7);
  const Eigen::Index in_dim = 2 * (3 + 3);
  const garment::Mlp mlp = identity_mlp(in_dim);
  const Eigen::MatrixXd base = garment::pool_garment_features(verts, grid, mlp);

  // Shuffle level 0's points and features with one permutation.
  std::vector<int> perm(120);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 gen(12);
  std::shuffle(perm.begin(), perm.end(), gen);
  garment::FeatureGrid shuffled = grid;
  for (int i = 0; i < 120; ++i) {
    shuffled.levels[0].points.row(i) = grid.levels[0].points.row(perm[static_cast<std::size_t>(i)]);
    shuffled.levels[0].features.row(i) = grid.levels[0].features.row(perm[static_cast<std::size_t>(i)]);
  }
  const Eigen::MatrixXd permuted = garment::pool_garment_features(verts, shuffled, mlp);
  CHECK(support::max_abs_diff(base, permuted) == 0.0);
}

TEST_CASE("pooled features are invariant to joint translation") {
  const Eigen::MatrixXd cloud = support::random_points(90, 13, 0.8);
  garment::FeatureGrid grid;
  grid.radii = {0.4};
  grid.max_samples = {6};
  grid.levels.resize(1);
  grid.levels[0].points = cloud;
  grid.levels[0].features = support::random_points(90, 14, 1.0);

  const Eigen::MatrixXd verts = support::random_points(20, 15, 0.7);
  const garment::Mlp mlp = identity_mlp(6);
  const Eigen::MatrixXd base = garment::pool_garment_features(verts, grid, mlp);

  const Eigen::RowVector3d t(3.25, -1.5, 0.75);
  garment::FeatureGrid moved = grid;
  moved.levels[0].points.rowwise() += t;
  const Eigen::MatrixXd shifted =
      garment::pool_garment_features(verts.rowwise() + t, moved, mlp);
  CHECK(support::max_abs_diff(base, shifted) < 1e-12);
}

TEST_CASE("single level and sample with the identity mlp exposes the raw gather") {
  garment::FeatureGrid grid;
  grid.radii = {10.0};
  grid.max_samples = {1};
  grid.levels.resize(1);
  grid.levels[0].points.resize(1, 3);
  grid.levels[0].points << 0.5, 0.25, -0.5;
  grid.levels[0].features.resize(1, 2);
  grid.levels[0].features << 7.0, -3.0;

  Eigen::MatrixXd vert(1, 3);
  vert << 0.1, 0.2, 0.3;
  const Eigen::MatrixXd out = garment::pool_garment_features(vert, grid, identity_mlp(5));
  Eigen::RowVectorXd expected(5);
  expected << 0.4, 0.05, -0.8, 7.0, -3.0;  // (point - vertex || feature)
  CHECK(support::max_abs_diff(out, expected) < 1e-15);
}

TEST_CASE("body encoding gathers zero offset on the surface and rotates equivariantly") {
  const Mesh body = support::jittered_grid(6, 6, 0.25, 16, 0.03);
  const Eigen::MatrixXd normals = garment::vertex_normals(body).N;

  Eigen::MatrixXd vert(1, 3);
  vert = body.V.row(14);
  const garment::Mlp mlp = identity_mlp(6);
  const Eigen::MatrixXd out = garment::encode_body_surface(vert, body, {1e-6}, {1}, mlp);
  CHECK(out.row(0).head(3).cwiseAbs().maxCoeff() < 1e-12);  // on-surface: zero relative coordinate
  CHECK(support::max_abs_diff(out.row(0).tail(3), normals.row(14)) < 1e-12);

  // Rigidly rotate garment + body: gathered offsets and normals rotate too.
  const Eigen::Matrix3d R = support::rodrigues_closed_form(Eigen::Vector3d(0.3, 0.7, -0.2));
  Mesh rotated = body;
  rotated.V = body.V * R.transpose();
  Eigen::MatrixXd vert2(1, 3);
  vert2 << 0.31, 0.42, 0.1;
  const Eigen::MatrixXd base = garment::encode_body_surface(vert2, body, {0.3}, {1}, mlp);
  const Eigen::MatrixXd rot =
      garment::encode_body_surface(vert2 * R.transpose(), rotated, {0.3}, {1}, mlp);
  CHECK(support::max_abs_diff(rot.row(0).head(3), base.row(0).head(3) * R.transpose()) < 1e-9);
  CHECK(support::max_abs_diff(rot.row(0).tail(3), base.row(0).tail(3) * R.transpose()) < 1e-9);
}

TEST_CASE("gcn layer closed forms") {
  // Isolated vertex, identity weights, nonnegative features: a fixed point.
  Eigen::MatrixXd H(1, 3);
  H << 0.5, 0.0, 2.0;
  const Eigen::MatrixXd out = garment::gcn_layer(H, {{}}, Eigen::MatrixXd::Identity(3, 3),
                                                 Eigen::RowVectorXd::Zero(3));
  CHECK(support::max_abs_diff(out, H) == 0.0);

  // Two connected vertices average themselves with the neighbor.
  Eigen::MatrixXd H2(2, 2);
  H2 << 1.0, -4.0, 3.0, 2.0;
  const Eigen::MatrixXd out2 = garment::gcn_layer(H2, {{1}, {0}}, Eigen::MatrixXd::Identity(2, 2),
                                                  Eigen::RowVectorXd::Zero(2));
  Eigen::MatrixXd expected(2, 2);
  expected << 2.0, 0.0, 2.0, 0.0;  // ReLU((h_self + h_other) / 2)
  CHECK(support::max_abs_diff(out2, expected) == 0.0);

  // Negative pre-activations clamp to zero.
  CHECK(garment::gcn_layer(-H.cwiseAbs(), {{}}, Eigen::MatrixXd::Identity(3, 3),
                           Eigen::RowVectorXd::Zero(3))
            .maxCoeff() == 0.0);
}

TEST_CASE("gcn layer is permutation equivariant") {
  const Mesh mesh = support::jittered_grid(5, 4, 0.3, 17, 0.04);
  const auto adjacency = garment::vertex_adjacency(mesh);
  const Eigen::Index n = mesh.V.rows();
  const Eigen::MatrixXd H = support::dyadic_matrix(n, 6, 18);
  const Eigen::MatrixXd W = support::dyadic_matrix(6, 5, 19);
  const Eigen::RowVectorXd B = support::dyadic_matrix(1, 5, 20).row(0);
  const Eigen::MatrixXd base = garment::gcn_layer(H, adjacency, W, B);

  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 gen(21);
  std::shuffle(perm.begin(), perm.end(), gen);  // perm[new] = old
  Eigen::MatrixXd Hp(n, H.cols());
  std::vector<std::vector<int>> adjp(static_cast<std::size_t>(n));
  std::vector<int> inverse(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) inverse[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = static_cast<int>(i);
  for (Eigen::Index i = 0; i < n; ++i) {
    Hp.row(i) = H.row(perm[static_cast<std::size_t>(i)]);
    for (int o : adjacency[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])])
      adjp[static_cast<std::size_t>(i)].push_back(inverse[static_cast<std::size_t>(o)]);
    std::sort(adjp[static_cast<std::size_t>(i)].begin(), adjp[static_cast<std::size_t>(i)].end());
  }
  const Eigen::MatrixXd permuted = garment::gcn_layer(Hp, adjp, W, B);
  for (Eigen::Index i = 0; i < n; ++i)
    CHECK(support::max_abs_diff(permuted.row(i), base.row(perm[static_cast<std::size_t>(i)])) == 0.0);
}

TEST_CASE("softmax rows sum to one and ignore per-row constants") {
  const Eigen::MatrixXd logits = support::random_points(40, 22, 5.0);
  const Eigen::MatrixXd S = garment::softmax_rows(logits);
  for (Eigen::Index i = 0; i < S.rows(); ++i)
    CHECK(S.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(S.minCoeff() > 0.0);

  // With eighth-integer logits a power-of-two shift is exact in floating
  // point, so the max-subtracted rows match bitwise.
  const Eigen::MatrixXd exact = support::dyadic_matrix(12, 6, 23);
  Eigen::MatrixXd boosted = exact;
  boosted.array() += 1024.0;
  CHECK(support::max_abs_diff(garment::softmax_rows(boosted), garment::softmax_rows(exact)) == 0.0);
}

TEST_CASE("temporal attention with one frame returns V exactly") {
  garment::AttentionWeights w;
  w.Wq = support::dyadic_matrix(5, 3, 23);
  w.Wk = support::dyadic_matrix(5, 3, 24);
  w.Wv = support::dyadic_matrix(5, 4, 25);
  w.bq = support::dyadic_matrix(1, 3, 26).row(0);
  w.bk = support::dyadic_matrix(1, 3, 27).row(0);
  w.bv = support::dyadic_matrix(1, 4, 28).row(0);
  Eigen::MatrixXd F5(1, 5);
  F5 << 0.3, -1.2, 0.5, 2.0, -0.25;
  const Eigen::MatrixXd V = (F5 * w.Wv).rowwise() + w.bv;
  CHECK(support::max_abs_diff(garment::temporal_attention(F5, w), V) == 0.0);
}

TEST_CASE("identical frames attend uniformly and reproduce V") {
  garment::AttentionWeights w;
  w.Wq = support::dyadic_matrix(4, 3, 30);
  w.Wk = support::dyadic_matrix(4, 3, 31);
  w.Wv = support::dyadic_matrix(4, 4, 32);
  w.bq = support::dyadic_matrix(1, 3, 33).row(0);
  w.bk = support::dyadic_matrix(1, 3, 34).row(0);
  w.bv = support::dyadic_matrix(1, 4, 35).row(0);
  Eigen::MatrixXd F(5, 4);
  for (int t = 0; t < 5; ++t) F.row(t) << 0.4, -0.7, 1.1, 0.2;
  Eigen::MatrixXd attention;
  const Eigen::MatrixXd fused = garment::temporal_attention(F, w, &attention);
  CHECK(support::max_abs_diff(attention, Eigen::MatrixXd::Constant(5, 5, 1.0 / 5)) == 0.0);
  const Eigen::MatrixXd V = (F * w.Wv).rowwise() + w.bv;
  CHECK(support::max_abs_diff(fused, V) < 1e-12);
}

TEST_CASE("attention rows sum to one on random inputs") {
  garment::AttentionWeights w;
  w.Wq = support::dyadic_matrix(6, 4, 36);
  w.Wk = support::dyadic_matrix(6, 4, 37);
  w.Wv = support::dyadic_matrix(6, 5, 38);
  w.bq = support::dyadic_matrix(1, 4, 39).row(0);
  w.bk = support::dyadic_matrix(1, 4, 40).row(0);
  w.bv = support::dyadic_matrix(1, 5, 41).row(0);
  const Eigen::MatrixXd F = support::random_points(7, 42, 2.0).replicate(1, 2);
  Eigen::MatrixXd attention;
  garment::temporal_attention(F, w, &attention);
  REQUIRE(attention.rows() == 7);
  for (Eigen::Index i = 0; i < attention.rows(); ++i)
    CHECK(attention.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("refine with zeroed displacement layers is the identity on geometry") {
  RefineFixture fx(3, 51);
  const std::string last = std::to_string(fx.config.gcn_hidden.size());
  for (int j = 1; j <= fx.config.iterations; ++j) {
    const std::string prefix = "iter" + std::to_string(j) + ".gcn." + last;
    fx.weights.at(prefix + ".weight").f64.setZero();
    fx.weights.at(prefix + ".bias").f64.setZero();
  }
  const garment::RefineResult result =
      garment::iterative_refine(fx.proposals, fx.grids, fx.bodies, fx.weights, fx.config);
  REQUIRE(result.refined.size() == fx.proposals.size());
  for (std::size_t t = 0; t < fx.proposals.size(); ++t) {
    CHECK(support::max_abs_diff(result.refined[t].V, fx.proposals[t].V) == 0.0);
    CHECK(result.refined[t].F == fx.proposals[t].F);
  }
  for (const auto& iteration : result.displacements)
    for (const auto& D : iteration) CHECK(D.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a single iteration equals the hand-composed pass") {
  RefineFixture fx(2, 52);
  fx.config.iterations = 1;
  fx.weights = garment::init_refiner_weights(fx.config, 52);

  const garment::RefineResult result =
      garment::iterative_refine(fx.proposals, fx.grids, fx.bodies, fx.weights, fx.config);

  const garment::Mlp pool_mlp = garment::load_mlp(fx.weights, "iter1.pool.mlp");
  const garment::Mlp body_mlp = garment::load_mlp(fx.weights, "iter1.body.mlp");
  const garment::Mlp gcn = garment::load_mlp(fx.weights, "iter1.gcn");
  const auto adjacency = garment::vertex_adjacency(fx.proposals[0]);

  for (std::size_t t = 0; t < fx.proposals.size(); ++t) {
    const Eigen::MatrixXd& V = fx.proposals[t].V;
    const Eigen::Index n = V.rows();
    Eigen::MatrixXd X(n, 3 + fx.config.pool_feature_dim + fx.config.body_feature_dim + fx.config.attention_dim);
    X.leftCols(3) = V;
    X.middleCols(3, fx.config.pool_feature_dim) = garment::pool_garment_features(V, fx.grids[t], pool_mlp);
    X.middleCols(3 + fx.config.pool_feature_dim, fx.config.body_feature_dim) =
        garment::encode_body_surface(V, fx.bodies[t], fx.config.radii, fx.config.max_samples, body_mlp);
    X.rightCols(fx.config.attention_dim).setZero();

    Eigen::MatrixXd H = X;
    for (std::size_t l = 0; l + 1 < gcn.W.size(); ++l) H = garment::gcn_layer(H, adjacency, gcn.W[l], gcn.b[l], true);
    const Eigen::MatrixXd D = garment::gcn_layer(H, adjacency, gcn.W.back(), gcn.b.back(), false);
    CHECK(support::max_abs_diff(result.refined[t].V, V + D) == 0.0);
    CHECK(support::max_abs_diff(result.displacements[0][t], D) == 0.0);
  }
}

TEST_CASE("refine rejects misaligned inputs and non-finite weights") {
  RefineFixture fx(2, 53);
  auto bodies_short = fx.bodies;
  bodies_short.pop_back();
  CHECK_THROWS_AS(garment::iterative_refine(fx.proposals, fx.grids, bodies_short, fx.weights, fx.config),
                  garment::InvalidInput);

  auto proposals_bad = fx.proposals;
  proposals_bad[1] = support::single_triangle();
  CHECK_THROWS_AS(garment::iterative_refine(proposals_bad, fx.grids, fx.bodies, fx.weights, fx.config),
                  garment::InvalidInput);

  fx.weights.at("iter1.gcn.2.weight").f64(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(garment::iterative_refine(fx.proposals, fx.grids, fx.bodies, fx.weights, fx.config),
                  garment::NumericalError);
}

TEST_CASE("weight validation flags missing and misshapen blocks") {
  RefineFixture fx(1, 54);
  CHECK_NOTHROW(garment::validate_refiner_weights(fx.config, fx.weights));
  garment::NeuralWeights missing = fx.weights;
  missing.erase("iter2.attn.wq");
  CHECK_THROWS_AS(garment::validate_refiner_weights(fx.config, missing), garment::InvalidInput);
  garment::NeuralWeights misshapen = fx.weights;
  misshapen.at("iter1.gcn.0.weight").f64 = Eigen::MatrixXd::Zero(3, 3);
  CHECK_THROWS_AS(garment::validate_refiner_weights(fx.config, misshapen), garment::InvalidInput);
}

}  // TEST_SUITE
