#pragma once

#include <string>
#include <vector>

#include "distlift/config.hpp"
#include "distlift/datagen.hpp"
#include "distlift/lifter.hpp"
#include "distlift/metrics.hpp"

namespace distlift::experiments {

// A run is fully determined by the config (seeds included) plus the code
// version; out_dir receives spec copy, config hash, checkpoints, CSVs, SVGs.
struct ExperimentSpec {
  config::Config cfg;
  std::string out_dir;
  std::string spec_text;  // verbatim spec file contents, archived in the run

  static ExperimentSpec from_file(const std::string& path,
                                  const std::string& out_dir);
};

// MPJPE / P-MPJPE / PCKh of a parameter set on jittered test data distorted
// with preset d; rows are labeled (preset_name, scenario_label, metric).
metrics::MetricReport evaluate_params(const lifter::LifterParams& params,
                                      const datagen::Dataset& test,
                                      const camera::DistortionParams& d,
                                      const std::string& preset_name,
                                      const std::string& scenario_label,
                                      const config::EvalConfig& eval);

double evaluate_mpjpe(const lifter::LifterParams& params,
                      const datagen::Dataset& test,
                      const camera::DistortionParams& d,
                      const config::EvalConfig& eval);

// First `count` stride-`frames` windows across the records, distorted by d
// and labeled with their ground-truth center frames: the small target-camera
// batch scenario-1 adaptation assumes.
lifter::Batch adaptation_windows(const datagen::Dataset& data,
                                 const camera::DistortionParams& d,
                                 const config::EvalConfig& eval, int frames,
                                 int count);

// Every record's stored 2D track pushed through d; input for label-free
// scenario-2 adaptation.
std::vector<datagen::Trajectory2D> distorted_tracks(
    const datagen::Dataset& data, const camera::DistortionParams& d,
    const std::string& track);

// Trains an undistorted supervised baseline, evaluates it on the undistorted
// test set and on every configured preset; one mpjpe row per preset plus the
// undistorted row.
metrics::MetricReport run_degradation_trend(const ExperimentSpec& spec);

struct AdaptationCurve {
  std::string init;      // "meta" or "pretrain"
  std::string scenario;  // "scenario1" or "scenario2"
  std::string preset;
  std::vector<double> mpjpe;  // held-out test MPJPE, epochs+1 points
};

struct DynamicsResult {
  std::vector<AdaptationCurve> curves;
};

// Builds both inits (pretraining only vs pretraining + meta-training), then
// runs both adaptation procedures on every configured preset under identical
// budgets, recording held-out MPJPE per epoch.
DynamicsResult run_adaptation_dynamics(const ExperimentSpec& spec);

// Four cumulative variants: supervised baseline, +meta-learning (uniform
// task sampling), +stratified sampling, +random-distortion pretraining.
// Each is scored on the first configured preset after scenario-1 adaptation.
metrics::MetricReport run_ablation(const ExperimentSpec& spec);

// Same training budget fed by jittered-2D tasks vs clean-projection tasks,
// both scored on jittered distorted test data.
metrics::MetricReport run_generation_path_comparison(const ExperimentSpec& spec);

// Required artifacts: spec.cfg, config_hash.txt, at least one checkpoint,
// CSV, and SVG.  Fills `missing` (when given) with what is absent.
bool check_run_dir_complete(const std::string& dir,
                            std::vector<std::string>* missing = nullptr);

}  // namespace distlift::experiments
