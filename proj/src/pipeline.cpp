#include "garment/pipeline.hpp"

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "garment/errors.hpp"
#include "garment/io_util.hpp"
#include "garment/metrics.hpp"
#include "garment/obj_io.hpp"
#include "garment/remesh.hpp"
#include "garment/shape_space.hpp"
#include "garment/skinning.hpp"
#include "garment/spatial.hpp"

namespace garment {

namespace fs = std::filesystem;

namespace {

nlohmann::json parse_json_file(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

void write_report(const fs::path& workdir, const std::string& stage, nlohmann::json j) {
  j["stage"] = stage;
  write_file_atomic(workdir / "reports" / (stage + ".json"), j.dump(2) + "\n");
}

std::vector<BoundaryLoop> labeled_loops(const Mesh& mesh, const fs::path& labels_json) {
  std::vector<BoundaryLoop> loops = extract_boundary_loops(mesh);
  assign_boundary_labels_from_file(loops, labels_json);
  return loops;
}

std::vector<Mesh> load_frames(const fs::path& dir, int frames) {
  std::vector<Mesh> out;
  for (int t = 0; t < frames; ++t) out.push_back(load_obj(dir / frame_file_name(t)));
  return out;
}

nlohmann::json losses_json(const IterationLosses& l) {
  return {{"chamfer", l.chamfer}, {"edge", l.edge}, {"normal", l.normal}, {"boundary", l.boundary},
          {"total", l.total}};
}

void stage_synth(const fs::path& workdir, const PipelineConfig& config) {
  SynthConfig synth;
  synth.seed = config.seed;
  synth.frames = config.frames;
  synth.points_per_frame = config.points_per_frame;
  synth.incompleteness = config.incompleteness;
  synth.label_error_rate = config.label_error_rate;
  synth.fps = config.fps;
  synth.variants = config.variants;
  synth.swing_amplitude = config.swing_amplitude;
  const SyntheticScene scene = build_synthetic_scene(synth);
  write_synthetic_scene(workdir, scene, config.refiner, config.seed);

  nlohmann::json j;
  j["frames"] = config.frames;
  j["pointsPerFrame"] = config.points_per_frame;
  j["incompleteness"] = config.incompleteness;
  j["labelErrorRate"] = config.label_error_rate;
  j["bodyVertices"] = scene.skeleton.body_mesh.vertex_count();
  j["templateVertices"] = scene.template_garment.vertex_count();
  j["sourceVertices"] = scene.source_garment.vertex_count();
  j["variants"] = config.variants;
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& cloud : scene.cloud_points) counts.push_back(cloud.rows());
  j["cloudPoints"] = std::move(counts);
  write_report(workdir, "synth", std::move(j));
}

void stage_register(const fs::path& workdir, const PipelineConfig& config) {
  const Mesh source = load_obj(workdir / "source" / frame_file_name(0));
  const Mesh target = load_obj(workdir / "template.obj");
  const std::vector<BoundaryLoop> source_loops = labeled_loops(source, workdir / "source_boundaries.json");
  const std::vector<BoundaryLoop> target_loops = labeled_loops(target, workdir / "template_boundaries.json");

  RegistrationConfig cfg = config.registration;
  cfg.seed = config.seed;
  const RegistrationReport report = register_mesh(source, source_loops, target, target_loops, cfg);
  if (report.diverged) throw NumericalError("registration diverged: " + report.message);

  Mesh registered = source;
  registered.V = report.final_vertices;
  save_obj(workdir / "registered.obj", registered);

  nlohmann::json j;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  j["message"] = report.message;
  j["initial"] = losses_json(report.trace.front());
  j["final"] = losses_json(report.trace.back());
  nlohmann::json trace = nlohmann::json::array();
  for (const IterationLosses& l : report.trace) trace.push_back(losses_json(l));
  j["trace"] = std::move(trace);
  write_report(workdir, "register", std::move(j));
}

void stage_remesh(const fs::path& workdir, const PipelineConfig& config) {
  const Mesh templ = load_obj(workdir / "template.obj");
  const Mesh registered = load_obj(workdir / "registered.obj");
  const BarycentricMap map = build_barycentric_map(templ, registered);
  save_barycentric_map(workdir / "map.json", map);

  double max_proj = 0.0, mean_proj = 0.0;
  for (Eigen::Index i = 0; i < templ.V.rows(); ++i) {
    const FaceProjection proj = nearest_face_projection(templ.V.row(i).transpose(), registered);
    max_proj = std::max(max_proj, proj.distance);
    mean_proj += proj.distance;
  }
  mean_proj /= static_cast<double>(templ.V.rows());

  for (int t = 0; t < config.frames; ++t) {
    const Mesh frame = load_obj(workdir / "source" / frame_file_name(t));
    save_obj(workdir / "remeshed" / frame_file_name(t), apply_barycentric_map(map, frame));
  }

  nlohmann::json j;
  j["frames"] = config.frames;
  j["maxProjectionDistance"] = max_proj;
  j["meanProjectionDistance"] = mean_proj;
  write_report(workdir, "remesh", std::move(j));
}

void stage_fit_pca(const fs::path& workdir, const PipelineConfig& config) {
  std::vector<Mesh> variants;
  for (int v = 0; v < config.variants; ++v) variants.push_back(load_obj(workdir / "variants" / variant_file_name(v)));
  const ShapeSpace space = fit_pca(variants, config.pca_components);
  save_shape_space(workdir / "space.bin", space);

  nlohmann::json j;
  j["samples"] = config.variants;
  j["components"] = space.d();
  j["singularValues"] = std::vector<double>(space.singular_values.data(),
                                            space.singular_values.data() + space.singular_values.size());
  write_report(workdir, "fit-pca", std::move(j));
}

void stage_encode(const fs::path& workdir, const PipelineConfig&) {
  const ShapeSpace space = load_shape_space(workdir / "space.bin");
  const Mesh canonical_gt = load_obj(workdir / "remeshed" / frame_file_name(0));
  const Eigen::VectorXd alpha = encode(space, canonical_gt);
  nlohmann::json aj;
  aj["alpha"] = std::vector<double>(alpha.data(), alpha.data() + alpha.size());
  write_file_atomic(workdir / "alpha.json", aj.dump(2) + "\n");

  const Mesh canonical = decode(space, alpha);
  save_obj(workdir / "canonical.obj", canonical);

  nlohmann::json j;
  j["components"] = alpha.size();
  j["reconstructionErrorMm"] = canonical_l2_mm(canonical, canonical_gt);
  write_report(workdir, "encode", std::move(j));
}

Eigen::VectorXd load_alpha(const fs::path& path) {
  const nlohmann::json j = parse_json_file(path);
  if (!j.contains("alpha") || !j["alpha"].is_array()) throw InvalidInput(path.string() + ": missing 'alpha' array");
  Eigen::VectorXd alpha(static_cast<Eigen::Index>(j["alpha"].size()));
  for (Eigen::Index i = 0; i < alpha.size(); ++i) alpha(i) = j["alpha"][static_cast<std::size_t>(i)].get<double>();
  return alpha;
}

void stage_skin(const fs::path& workdir, const PipelineConfig& config) {
  const ShapeSpace space = load_shape_space(workdir / "space.bin");
  const Eigen::VectorXd alpha = load_alpha(workdir / "alpha.json");
  const Skeleton skeleton = load_skeleton(workdir / "skeleton.json");
  const PoseSequence poses = load_pose_sequence(workdir / "poses.json");

  const Mesh canonical = decode(space, alpha);
  WeightInterpolationConfig wcfg;
  wcfg.k = config.skin_k;
  wcfg.smoothing_iterations = config.smoothing_iterations;
  wcfg.smoothing_step = config.smoothing_step;
  const SkinningWeights weights = interpolate_skinning_weights(canonical.V, skeleton, wcfg, canonical);

  for (std::size_t t = 0; t < poses.frames.size(); ++t) {
    Mesh posed = canonical;
    posed.V = linear_blend_skin(canonical.V, weights, pose_skeleton(skeleton, poses.frames[t]));
    save_obj(workdir / "proposals" / frame_file_name(static_cast<int>(t)), posed);
  }

  nlohmann::json j;
  j["frames"] = poses.frames.size();
  j["K"] = config.skin_k;
  j["smoothingIterations"] = config.smoothing_iterations;
  j["smoothingStep"] = config.smoothing_step;
  write_report(workdir, "skin", std::move(j));
}

void stage_refine(const fs::path& workdir, const PipelineConfig& config) {
  const std::vector<Mesh> proposals = load_frames(workdir / "proposals", config.frames);
  const std::vector<Mesh> bodies = load_frames(workdir / "body_posed", config.frames);
  const NeuralWeights weights = load_tensors(workdir / "refiner_weights.bin");

  std::vector<FeatureGrid> grids;
  for (int t = 0; t < config.frames; ++t) {
    const auto [points, labels] = load_point_cloud(workdir / "clouds" / cloud_file_name(t));
    const Eigen::MatrixXd garment_points = select_labeled_points(points, labels, 1);
    grids.push_back(build_feature_grid(garment_points, config.refiner.radii, config.refiner.max_samples, weights));
  }

  const RefineResult result = iterative_refine(proposals, grids, bodies, weights, config.refiner);
  for (int t = 0; t < config.frames; ++t)
    save_obj(workdir / "refined" / frame_file_name(t), result.refined[static_cast<std::size_t>(t)]);

  nlohmann::json j;
  j["iterations"] = config.refiner.iterations;
  nlohmann::json mean_norms = nlohmann::json::array(), max_norms = nlohmann::json::array();
  for (const auto& per_frame : result.displacements) {
    double mean = 0.0, mx = 0.0;
    Eigen::Index rows = 0;
    for (const Eigen::MatrixXd& D : per_frame) {
      mean += D.rowwise().norm().sum();
      mx = std::max(mx, D.rowwise().norm().maxCoeff());
      rows += D.rows();
    }
    mean_norms.push_back(mean / static_cast<double>(rows));
    max_norms.push_back(mx);
  }
  j["meanDisplacementNorm"] = std::move(mean_norms);
  j["maxDisplacementNorm"] = std::move(max_norms);
  write_report(workdir, "refine", std::move(j));
}

void stage_eval(const fs::path& workdir, const PipelineConfig& config) {
  const std::vector<Mesh> pred = load_frames(workdir / "refined", config.frames);
  const std::vector<Mesh> gt = load_frames(workdir / "remeshed", config.frames);
  SequenceMetrics metrics = evaluate_sequence(pred, gt, config.fps);
  metrics.canonical_l2_mm =
      canonical_l2_mm(load_obj(workdir / "canonical.obj"), load_obj(workdir / "remeshed" / frame_file_name(0)));

  double cd_total = 0.0;
  for (int t = 0; t < config.frames; ++t) {
    const auto [points, labels] = load_point_cloud(workdir / "clouds" / cloud_file_name(t));
    const double cd = one_way_chamfer(pred[static_cast<std::size_t>(t)], select_labeled_points(points, labels, 1));
    metrics.per_frame_chamfer_mm.push_back(cd);
    cd_total += cd;
  }
  metrics.one_way_chamfer_mm = cd_total / static_cast<double>(config.frames);

  save_metrics(workdir / "metrics.json", metrics);
  nlohmann::json j = parse_json_file(workdir / "metrics.json");

  PosedLossInputs loss_inputs;
  loss_inputs.pred = pred;
  loss_inputs.gt = gt;
  loss_inputs.bodies = load_frames(workdir / "body_posed", config.frames);
  const LossBreakdown breakdown = posed_loss(loss_inputs, config.loss_weights);
  j["posedLoss"] = {{"terms", breakdown.terms}, {"weights", breakdown.weights}, {"total", breakdown.total}};
  write_report(workdir, "eval", std::move(j));
}

template <typename Fn>
void run_stage(const std::string& name, Fn&& fn) {
  try {
    fn();
  } catch (const InvalidInput& e) {
    throw InvalidInput("stage " + name + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError("stage " + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw NumericalError("stage " + name + ": " + e.what());
  }
}

}  // namespace

PipelineConfig load_pipeline_config(const fs::path& path, const PipelineConfig& base) {
  const nlohmann::json j = parse_json_file(path);
  PipelineConfig config = base;
  try {
    config.seed = j.value("seed", config.seed);
    config.fps = j.value("fps", config.fps);
    config.frames = j.value("frames", config.frames);
    config.points_per_frame = j.value("pointsPerFrame", config.points_per_frame);
    config.incompleteness = j.value("incompleteness", config.incompleteness);
    config.label_error_rate = j.value("labelErrorRate", config.label_error_rate);
    config.variants = j.value("variants", config.variants);
    config.swing_amplitude = j.value("swingAmplitude", config.swing_amplitude);
    config.pca_components = j.value("pcaComponents", config.pca_components);
    config.skin_k = j.value("K", config.skin_k);
    config.smoothing_iterations = j.value("smoothingIterations", config.smoothing_iterations);
    config.smoothing_step = j.value("smoothingStep", config.smoothing_step);
    if (j.contains("registration")) {
      const nlohmann::json& r = j["registration"];
      RegistrationConfig& cfg = config.registration;
      cfg.lambda_chamfer = r.value("lambdaChamfer", cfg.lambda_chamfer);
      cfg.lambda_edge = r.value("lambdaEdge", cfg.lambda_edge);
      cfg.lambda_normal = r.value("lambdaNormal", cfg.lambda_normal);
      cfg.lambda_boundary = r.value("lambdaBoundary", cfg.lambda_boundary);
      cfg.step_size = r.value("stepSize", cfg.step_size);
      cfg.max_iterations = r.value("maxIterations", cfg.max_iterations);
      cfg.convergence_tol = r.value("convergenceTol", cfg.convergence_tol);
      cfg.chamfer_samples = r.value("chamferSamples", cfg.chamfer_samples);
      if (r.contains("boundaryPairs")) {
        cfg.boundary_pairs.clear();
        for (const auto& pair : r["boundaryPairs"])
          cfg.boundary_pairs.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
      }
    }
    if (j.contains("refiner")) {
      const nlohmann::json& r = j["refiner"];
      RefinerConfig& cfg = config.refiner;
      cfg.iterations = r.value("iterations", cfg.iterations);
      if (r.contains("radii")) cfg.radii = r["radii"].get<std::vector<double>>();
      if (r.contains("maxSamples")) cfg.max_samples = r["maxSamples"].get<std::vector<int>>();
      cfg.grid_feature_dim = r.value("gridFeatureDim", cfg.grid_feature_dim);
      cfg.pool_feature_dim = r.value("poolFeatureDim", cfg.pool_feature_dim);
      cfg.body_feature_dim = r.value("bodyFeatureDim", cfg.body_feature_dim);
      cfg.attention_dim = r.value("attentionDim", cfg.attention_dim);
    }
    if (j.contains("lossWeights")) {
      const nlohmann::json& w = j["lossWeights"];
      LossWeights& lw = config.loss_weights;
      lw.ce = w.value("ce", lw.ce);
      lw.alpha_l2 = w.value("alphaL2", lw.alpha_l2);
      lw.canonical_vertex_l2 = w.value("canonicalVertexL2", lw.canonical_vertex_l2);
      lw.canonical_interpenetration = w.value("canonicalInterpenetration", lw.canonical_interpenetration);
      lw.canonical_laplacian = w.value("canonicalLaplacian", lw.canonical_laplacian);
      lw.posed_vertex_l2 = w.value("posedVertexL2", lw.posed_vertex_l2);
      lw.posed_interpenetration = w.value("posedInterpenetration", lw.posed_interpenetration);
      lw.posed_laplacian = w.value("posedLaplacian", lw.posed_laplacian);
      lw.temporal = w.value("temporal", lw.temporal);
      if (w.contains("iterationWeights")) lw.iteration_weights = w["iterationWeights"].get<std::vector<double>>();
      validate_loss_weights(lw);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  return config;
}

void save_pipeline_config(const fs::path& path, const PipelineConfig& config) {
  nlohmann::json j;
  j["seed"] = config.seed;
  j["fps"] = config.fps;
  j["frames"] = config.frames;
  j["pointsPerFrame"] = config.points_per_frame;
  j["incompleteness"] = config.incompleteness;
  j["labelErrorRate"] = config.label_error_rate;
  j["variants"] = config.variants;
  j["swingAmplitude"] = config.swing_amplitude;
  j["pcaComponents"] = config.pca_components;
  j["K"] = config.skin_k;
  j["smoothingIterations"] = config.smoothing_iterations;
  j["smoothingStep"] = config.smoothing_step;
  j["registration"] = {{"lambdaChamfer", config.registration.lambda_chamfer},
                       {"lambdaEdge", config.registration.lambda_edge},
                       {"lambdaNormal", config.registration.lambda_normal},
                       {"lambdaBoundary", config.registration.lambda_boundary},
                       {"stepSize", config.registration.step_size},
                       {"maxIterations", config.registration.max_iterations},
                       {"convergenceTol", config.registration.convergence_tol},
                       {"chamferSamples", config.registration.chamfer_samples},
                       {"boundaryPairs", config.registration.boundary_pairs}};
  j["refiner"] = {{"iterations", config.refiner.iterations},
                  {"radii", config.refiner.radii},
                  {"maxSamples", config.refiner.max_samples},
                  {"gridFeatureDim", config.refiner.grid_feature_dim},
                  {"poolFeatureDim", config.refiner.pool_feature_dim},
                  {"bodyFeatureDim", config.refiner.body_feature_dim},
                  {"attentionDim", config.refiner.attention_dim}};
  j["lossWeights"] = {{"ce", config.loss_weights.ce},
                      {"alphaL2", config.loss_weights.alpha_l2},
                      {"canonicalVertexL2", config.loss_weights.canonical_vertex_l2},
                      {"canonicalInterpenetration", config.loss_weights.canonical_interpenetration},
                      {"canonicalLaplacian", config.loss_weights.canonical_laplacian},
                      {"posedVertexL2", config.loss_weights.posed_vertex_l2},
                      {"posedInterpenetration", config.loss_weights.posed_interpenetration},
                      {"posedLaplacian", config.loss_weights.posed_laplacian},
                      {"temporal", config.loss_weights.temporal},
                      {"iterationWeights", config.loss_weights.iteration_weights}};
  write_file_atomic(path, j.dump(2) + "\n");
}

void run_pipeline(const fs::path& workdir, const PipelineConfig& config) {
  fs::create_directories(workdir);
  save_pipeline_config(workdir / "pipeline_config.json", config);
  run_stage("synth", [&] { stage_synth(workdir, config); });
  run_stage("register", [&] { stage_register(workdir, config); });
  run_stage("remesh", [&] { stage_remesh(workdir, config); });
  run_stage("fit-pca", [&] { stage_fit_pca(workdir, config); });
  run_stage("encode", [&] { stage_encode(workdir, config); });
  run_stage("skin", [&] { stage_skin(workdir, config); });
  run_stage("refine", [&] { stage_refine(workdir, config); });
  run_stage("eval", [&] { stage_eval(workdir, config); });
}

}  // namespace garment
