#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "garment/losses.hpp"
#include "garment/neural.hpp"
#include "garment/registration.hpp"
#include "garment/synth.hpp"

namespace garment {

// Everything the end-to-end run needs. All randomness flows from `seed`.
struct PipelineConfig {
  std::uint64_t seed = 7;
  double fps = 30.0;
  int frames = 8;
  int points_per_frame = 2000;
  double incompleteness = 0.0;
  double label_error_rate = 0.0;
  int variants = 12;
  double swing_amplitude = 0.35;
  int pca_components = 8;
  // K = 256 targets a full-resolution body; the synthetic body has a few
  // hundred vertices, so the pipeline default keeps the same ~4% neighborhood
  // fraction.
  int skin_k = 24;
  int smoothing_iterations = 10;
  double smoothing_step = 0.5;
  RegistrationConfig registration;  // boundary pairs filled by the pipeline
  RefinerConfig refiner;
  LossWeights loss_weights;  // used for the eval stage's loss breakdown

  PipelineConfig() {
    registration.lambda_edge = 1.0;
    registration.boundary_pairs = {{"waist", "waist"}, {"hem", "hem"}};
  }
};

// Reads a pipeline config JSON. Fields present in the file override `base`;
// absent fields keep the base values, so flag-derived settings survive.
PipelineConfig load_pipeline_config(const std::filesystem::path& path,
                                    const PipelineConfig& base = PipelineConfig());
void save_pipeline_config(const std::filesystem::path& path, const PipelineConfig& config);

// Runs synth -> register -> remesh -> fit-pca -> encode -> skin -> refine ->
// eval inside `workdir`. Every stage writes its artifacts plus a JSON report
// under reports/; all file references in reports are workdir-relative, so two
// runs with one seed are byte-identical. Throws on the first failing stage
// with the stage name in the message.
void run_pipeline(const std::filesystem::path& workdir, const PipelineConfig& config);

}  // namespace garment
