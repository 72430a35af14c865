#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "garment/errors.hpp"
#include "garment/io_util.hpp"
#include "garment/metrics.hpp"
#include "garment/neural.hpp"
#include "garment/obj_io.hpp"
#include "garment/pipeline.hpp"
#include "garment/registration.hpp"
#include "garment/remesh.hpp"
#include "garment/shape_space.hpp"
#include "garment/skinning.hpp"
#include "garment/synth.hpp"

namespace fs = std::filesystem;
using namespace garment;

namespace {

// Flags are parsed first; when --config names a pipeline config JSON, its
// values replace the flag values.
struct ConfiguredOptions {
  std::string config_path;
  PipelineConfig resolve(const PipelineConfig& from_flags) const {
    if (config_path.empty()) return from_flags;
    return load_pipeline_config(config_path, from_flags);
  }
};

int count_frames(const fs::path& dir, const std::string& what, bool clouds = false) {
  int n = 0;
  while (fs::exists(dir / (clouds ? cloud_file_name(n) : frame_file_name(n)))) ++n;
  if (n == 0) throw InvalidInput("no frame files found in " + dir.string() + " (" + what + ")");
  return n;
}

std::vector<Mesh> load_frame_dir(const fs::path& dir, const std::string& what) {
  const int n = count_frames(dir, what);
  std::vector<Mesh> frames;
  for (int t = 0; t < n; ++t) frames.push_back(load_obj(dir / frame_file_name(t)));
  return frames;
}

Eigen::VectorXd load_alpha_file(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  if (!j.contains("alpha") || !j["alpha"].is_array()) throw InvalidInput(path.string() + ": missing 'alpha' array");
  Eigen::VectorXd alpha(static_cast<Eigen::Index>(j["alpha"].size()));
  for (Eigen::Index i = 0; i < alpha.size(); ++i) alpha(i) = j["alpha"][static_cast<std::size_t>(i)].get<double>();
  return alpha;
}

void save_alpha_file(const fs::path& path, const Eigen::VectorXd& alpha) {
  nlohmann::json j;
  j["alpha"] = std::vector<double>(alpha.data(), alpha.data() + alpha.size());
  write_file_atomic(path, j.dump(2) + "\n");
}

std::vector<BoundaryLoop> loops_with_labels(const Mesh& mesh, const std::string& labels_path) {
  std::vector<BoundaryLoop> loops = extract_boundary_loops(mesh);
  if (!labels_path.empty()) assign_boundary_labels_from_file(loops, labels_path);
  return loops;
}

void add_synth(CLI::App& app) {
  auto* cmd = app.add_subcommand("synth", "generate the synthetic two-leg/skirt scene");
  auto opts = std::make_shared<ConfiguredOptions>();
  auto out = std::make_shared<std::string>();
  auto flags = std::make_shared<PipelineConfig>();
  cmd->add_option("--out", *out, "output directory")->required();
  cmd->add_option("--seed", flags->seed, "random seed");
  cmd->add_option("--frames", flags->frames, "frame count");
  cmd->add_option("--points", flags->points_per_frame, "cloud points per frame");
  cmd->add_option("--incompleteness", flags->incompleteness, "fraction of cloud points cropped away");
  cmd->add_option("--label-noise,--label-error-rate", flags->label_error_rate, "fraction of point labels flipped");
  cmd->add_option("--variants", flags->variants, "canonical shape variants");
  cmd->add_option("--fps", flags->fps, "pose sequence frame rate");
  cmd->add_option("--swing", flags->swing_amplitude, "hip swing amplitude (radians)");
  cmd->add_option("--config", opts->config_path, "pipeline config JSON; overrides flags");
  cmd->callback([opts, out, flags] {
    const PipelineConfig config = opts->resolve(*flags);
    SynthConfig synth;
    synth.seed = config.seed;
    synth.frames = config.frames;
    synth.points_per_frame = config.points_per_frame;
    synth.incompleteness = config.incompleteness;
    synth.label_error_rate = config.label_error_rate;
    synth.fps = config.fps;
    synth.variants = config.variants;
    synth.swing_amplitude = config.swing_amplitude;
    write_synthetic_scene(*out, build_synthetic_scene(synth), config.refiner, config.seed);
  });
}

void add_register(CLI::App& app) {
  auto* cmd = app.add_subcommand("register", "deform a source garment mesh onto a template");
  auto opts = std::make_shared<ConfiguredOptions>();
  struct Args {
    std::string source, target, source_boundaries, target_boundaries, out, report;
    std::vector<std::string> pairs;
  };
  auto args = std::make_shared<Args>();
  auto flags = std::make_shared<PipelineConfig>();
  cmd->add_option("--source", args->source, "source mesh (deformed)")->required();
  cmd->add_option("--target", args->target, "target mesh")->required();
  cmd->add_option("--source-boundaries", args->source_boundaries, "label JSON for the source");
  cmd->add_option("--target-boundaries", args->target_boundaries, "label JSON for the target");
  cmd->add_option("--pair", args->pairs, "boundary pair sourceLabel:targetLabel (repeatable)");
  cmd->add_option("--out", args->out, "registered mesh output")->required();
  cmd->add_option("--report", args->report, "optional registration report JSON");
  cmd->add_option("--lambda-chamfer", flags->registration.lambda_chamfer, "Chamfer weight");
  cmd->add_option("--lambda-edge", flags->registration.lambda_edge, "edge length weight");
  cmd->add_option("--lambda-normal", flags->registration.lambda_normal, "normal consistency weight");
  cmd->add_option("--lambda-boundary", flags->registration.lambda_boundary, "boundary Chamfer weight");
  cmd->add_option("--step", flags->registration.step_size, "initial step size");
  cmd->add_option("--iters", flags->registration.max_iterations, "max iterations");
  cmd->add_option("--tol", flags->registration.convergence_tol, "relative convergence tolerance");
  cmd->add_option("--samples", flags->registration.chamfer_samples, "Chamfer samples per iteration (0 = all)");
  cmd->add_option("--seed", flags->seed, "random seed");
  cmd->add_option("--config", opts->config_path, "pipeline config JSON; overrides flags");
  cmd->callback([opts, args, flags] {
    PipelineConfig config = opts->resolve(*flags);
    RegistrationConfig cfg = config.registration;
    cfg.seed = config.seed;
    if (!args->pairs.empty()) {
      cfg.boundary_pairs.clear();
      for (const std::string& pair : args->pairs) {
        const auto colon = pair.find(':');
        if (colon == std::string::npos) throw InvalidInput("--pair expects sourceLabel:targetLabel, got " + pair);
        cfg.boundary_pairs.emplace_back(pair.substr(0, colon), pair.substr(colon + 1));
      }
    }
    if (args->source_boundaries.empty() || args->target_boundaries.empty()) cfg.boundary_pairs.clear();

    const Mesh source = load_obj(args->source);
    const Mesh target = load_obj(args->target);
    const auto source_loops = loops_with_labels(source, args->source_boundaries);
    const auto target_loops = loops_with_labels(target, args->target_boundaries);
    const RegistrationReport report = register_mesh(source, source_loops, target, target_loops, cfg);
    if (report.diverged) throw NumericalError("registration diverged: " + report.message);
    Mesh registered = source;
    registered.V = report.final_vertices;
    save_obj(args->out, registered);
    if (!args->report.empty()) {
      nlohmann::json j;
      j["iterations"] = report.iterations;
      j["converged"] = report.converged;
      j["message"] = report.message;
      nlohmann::json trace = nlohmann::json::array();
      for (const IterationLosses& l : report.trace)
        trace.push_back({{"chamfer", l.chamfer},
                         {"edge", l.edge},
                         {"normal", l.normal},
                         {"boundary", l.boundary},
                         {"total", l.total}});
      j["trace"] = std::move(trace);
      write_file_atomic(args->report, j.dump(2) + "\n");
    }
  });
}

void add_remesh(CLI::App& app) {
  auto* cmd = app.add_subcommand("remesh", "re-topologize a frame sequence via a barycentric map");
  struct Args {
    std::string templ, registered, frames, out, map;
  };
  auto args = std::make_shared<Args>();
  cmd->add_option("--template", args->templ, "template mesh")->required();
  cmd->add_option("--registered", args->registered, "registered mesh the map is built against")->required();
  cmd->add_option("--frames", args->frames, "directory of frame_%04d.obj in registered topology")->required();
  cmd->add_option("--out", args->out, "output directory")->required();
  cmd->add_option("--map", args->map, "optional path to save the map JSON");
  cmd->callback([args] {
    const Mesh templ = load_obj(args->templ);
    const Mesh registered = load_obj(args->registered);
    const BarycentricMap map = build_barycentric_map(templ, registered);
    if (!args->map.empty()) save_barycentric_map(args->map, map);
    const int n = count_frames(args->frames, "remesh input");
    for (int t = 0; t < n; ++t) {
      const Mesh frame = load_obj(fs::path(args->frames) / frame_file_name(t));
      save_obj(fs::path(args->out) / frame_file_name(t), apply_barycentric_map(map, frame));
    }
  });
}

void add_fit_pca(CLI::App& app) {
  auto* cmd = app.add_subcommand("fit-pca", "fit a garment shape space from same-topology meshes");
  struct Args {
    std::string meshes, out;
    int components = 0;
  };
  auto args = std::make_shared<Args>();
  cmd->add_option("--meshes", args->meshes, "directory of .obj meshes")->required();
  cmd->add_option("--components", args->components, "component count (default min(64, samples-1))");
  cmd->add_option("--out", args->out, "shape space output file")->required();
  cmd->callback([args] {
    std::vector<fs::path> files;
    if (!fs::is_directory(args->meshes)) throw InvalidInput(args->meshes + " is not a directory");
    for (const auto& entry : fs::directory_iterator(args->meshes))
      if (entry.path().extension() == ".obj") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<Mesh> meshes;
    for (const fs::path& f : files) meshes.push_back(load_obj(f));
    if (meshes.size() < 2) throw InvalidInput("fit-pca needs at least 2 meshes in " + args->meshes);
    const int d = args->components > 0 ? args->components : default_component_count(static_cast<int>(meshes.size()));
    save_shape_space(args->out, fit_pca(meshes, d));
  });
}

void add_encode(CLI::App& app) {
  auto* cmd = app.add_subcommand("encode", "project a mesh into a shape space");
  struct Args {
    std::string space, mesh, out;
  };
  auto args = std::make_shared<Args>();
  cmd->add_option("--space", args->space, "shape space file")->required();
  cmd->add_option("--mesh", args->mesh, "mesh to encode")->required();
  cmd->add_option("--out", args->out, "coefficient JSON output")->required();
  cmd->callback([args] {
    const ShapeSpace space = load_shape_space(args->space);
    save_alpha_file(args->out, encode(space, load_obj(args->mesh)));
  });
}

void add_decode(CLI::App& app) {
  auto* cmd = app.add_subcommand("decode", "reconstruct a mesh from shape coefficients");
  struct Args {
    std::string space, alpha, out;
  };
  auto args = std::make_shared<Args>();
  cmd->add_option("--space", args->space, "shape space file")->required();
  cmd->add_option("--alpha", args->alpha, "coefficient JSON")->required();
  cmd->add_option("--out", args->out, "mesh output")->required();
  cmd->callback([args] {
    const ShapeSpace space = load_shape_space(args->space);
    save_obj(args->out, decode(space, load_alpha_file(args->alpha)));
  });
}

void add_skin(CLI::App& app) {
  auto* cmd = app.add_subcommand("skin", "pose a canonical garment with interpolated weights");
  auto opts = std::make_shared<ConfiguredOptions>();
  struct Args {
    std::string space, alpha, skeleton, poses, out;
    int exponent = 1;
  };
  auto args = std::make_shared<Args>();
  auto flags = std::make_shared<PipelineConfig>();
  flags->skin_k = 256;  // sized for a full-resolution body; pass --K for small ones
  cmd->add_option("--space", args->space, "shape space file")->required();
  cmd->add_option("--alpha", args->alpha, "coefficient JSON")->required();
  cmd->add_option("--skeleton", args->skeleton, "skeleton JSON")->required();
  cmd->add_option("--poses", args->poses, "pose sequence JSON")->required();
  cmd->add_option("--K", flags->skin_k, "nearest body vertices per garment vertex");
  cmd->add_option("--smooth-iters", flags->smoothing_iterations, "weight smoothing rounds");
  cmd->add_option("--smooth-step", flags->smoothing_step, "weight smoothing step in (0,1]");
  cmd->add_option("--exponent", args->exponent, "inverse-distance exponent (1 or 2)");
  cmd->add_option("--out", args->out, "output directory")->required();
  cmd->add_option("--config", opts->config_path, "pipeline config JSON; overrides flags");
  cmd->callback([opts, args, flags] {
    const PipelineConfig config = opts->resolve(*flags);
    const ShapeSpace space = load_shape_space(args->space);
    const Skeleton skeleton = load_skeleton(args->skeleton);
    const PoseSequence poses = load_pose_sequence(args->poses);
    const Mesh canonical = decode(space, load_alpha_file(args->alpha));
    WeightInterpolationConfig wcfg;
    wcfg.k = config.skin_k;
    wcfg.smoothing_iterations = config.smoothing_iterations;
    wcfg.smoothing_step = config.smoothing_step;
    wcfg.distance_exponent = args->exponent;
    const SkinningWeights weights = interpolate_skinning_weights(canonical.V, skeleton, wcfg, canonical);
    for (std::size_t t = 0; t < poses.frames.size(); ++t) {
      Mesh posed = canonical;
      posed.V = linear_blend_skin(canonical.V, weights, pose_skeleton(skeleton, poses.frames[t]));
      save_obj(fs::path(args->out) / frame_file_name(static_cast<int>(t)), posed);
    }
  });
}

void add_refine(CLI::App& app) {
  auto* cmd = app.add_subcommand("refine", "iterative displacement refinement of skinned proposals");
  auto opts = std::make_shared<ConfiguredOptions>();
  struct Args {
    std::string proposals, clouds, body, weights, out;
  };
  auto args = std::make_shared<Args>();
  auto flags = std::make_shared<PipelineConfig>();
  cmd->add_option("--proposals", args->proposals, "directory of proposal frame_%04d.obj")->required();
  cmd->add_option("--clouds", args->clouds, "directory of labeled cloud frame_%04d.txt")->required();
  cmd->add_option("--body", args->body, "directory of posed body frame_%04d.obj")->required();
  cmd->add_option("--weights", args->weights, "refiner weight container")->required();
  cmd->add_option("--iters", flags->refiner.iterations, "refinement iterations");
  cmd->add_option("--radii", flags->refiner.radii, "query-ball radii (meters)");
  cmd->add_option("--max-samples", flags->refiner.max_samples, "per-level sample caps");
  cmd->add_option("--out", args->out, "output directory")->required();
  cmd->add_option("--config", opts->config_path, "pipeline config JSON; overrides flags");
  cmd->callback([opts, args, flags] {
    const PipelineConfig config = opts->resolve(*flags);
    const std::vector<Mesh> proposals = load_frame_dir(args->proposals, "proposals");
    const int n = static_cast<int>(proposals.size());
    std::vector<Mesh> bodies;
    std::vector<FeatureGrid> grids;
    const NeuralWeights weights = load_tensors(args->weights);
    for (int t = 0; t < n; ++t) {
      bodies.push_back(load_obj(fs::path(args->body) / frame_file_name(t)));
      const auto [points, labels] = load_point_cloud(fs::path(args->clouds) / cloud_file_name(t));
      grids.push_back(build_feature_grid(select_labeled_points(points, labels, 1), config.refiner.radii,
                                         config.refiner.max_samples, weights));
    }
    const RefineResult result = iterative_refine(proposals, grids, bodies, weights, config.refiner);
    for (int t = 0; t < n; ++t)
      save_obj(fs::path(args->out) / frame_file_name(t), result.refined[static_cast<std::size_t>(t)]);
  });
}

void add_eval(CLI::App& app) {
  auto* cmd = app.add_subcommand("eval", "sequence metrics between prediction and ground truth");
  auto opts = std::make_shared<ConfiguredOptions>();
  struct Args {
    std::string pred, gt, out, clouds, canonical_pred, canonical_gt;
  };
  auto args = std::make_shared<Args>();
  auto flags = std::make_shared<PipelineConfig>();
  cmd->add_option("--pred", args->pred, "directory of predicted frame_%04d.obj")->required();
  cmd->add_option("--gt", args->gt, "directory of ground-truth frame_%04d.obj")->required();
  cmd->add_option("--fps", flags->fps, "frame rate for acceleration error");
  cmd->add_option("--clouds", args->clouds, "optional labeled clouds for one-way Chamfer");
  cmd->add_option("--canonical-pred", args->canonical_pred, "optional canonical prediction mesh");
  cmd->add_option("--canonical-gt", args->canonical_gt, "optional canonical ground-truth mesh");
  cmd->add_option("--out", args->out, "metrics JSON output")->required();
  cmd->add_option("--config", opts->config_path, "pipeline config JSON; overrides flags");
  cmd->callback([opts, args, flags] {
    const PipelineConfig config = opts->resolve(*flags);
    const std::vector<Mesh> pred = load_frame_dir(args->pred, "predictions");
    const std::vector<Mesh> gt = load_frame_dir(args->gt, "ground truth");
    SequenceMetrics metrics = evaluate_sequence(pred, gt, config.fps);
    if (!args->canonical_pred.empty() != !args->canonical_gt.empty())
      throw InvalidInput("--canonical-pred and --canonical-gt must be given together");
    if (!args->canonical_pred.empty())
      metrics.canonical_l2_mm = canonical_l2_mm(load_obj(args->canonical_pred), load_obj(args->canonical_gt));
    if (!args->clouds.empty()) {
      double total = 0.0;
      for (std::size_t t = 0; t < pred.size(); ++t) {
        const auto [points, labels] = load_point_cloud(fs::path(args->clouds) / cloud_file_name(static_cast<int>(t)));
        const double cd = one_way_chamfer(pred[t], select_labeled_points(points, labels, 1));
        metrics.per_frame_chamfer_mm.push_back(cd);
        total += cd;
      }
      metrics.one_way_chamfer_mm = total / static_cast<double>(pred.size());
    }
    save_metrics(args->out, metrics);
  });
}

void add_run(CLI::App& app) {
  auto* cmd = app.add_subcommand("run", "full synthetic pipeline: synth through eval");
  auto opts = std::make_shared<ConfiguredOptions>();
  auto out = std::make_shared<std::string>();
  auto flags = std::make_shared<PipelineConfig>();
  cmd->add_option("--out", *out, "working directory")->required();
  cmd->add_option("--seed", flags->seed, "random seed");
  cmd->add_option("--frames", flags->frames, "frame count");
  cmd->add_option("--points", flags->points_per_frame, "cloud points per frame");
  cmd->add_option("--incompleteness", flags->incompleteness, "fraction of cloud points cropped away");
  cmd->add_option("--label-noise", flags->label_error_rate, "fraction of point labels flipped");
  cmd->add_option("--fps", flags->fps, "frame rate");
  cmd->add_option("--K", flags->skin_k, "skinning neighbors");
  cmd->add_option("--config", opts->config_path, "pipeline config JSON; overrides flags");
  cmd->callback([opts, out, flags] { run_pipeline(*out, opts->resolve(*flags)); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"garment geometry toolkit"};
  app.require_subcommand(1);
  add_synth(app);
  add_register(app);
  add_remesh(app);
  add_fit_pca(app);
  add_encode(app);
  add_decode(app);
  add_skin(app);
  add_refine(app);
  add_eval(app);
  add_run(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
