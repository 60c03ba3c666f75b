#include "distlift/experiments.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "distlift/adaptation.hpp"
#include "distlift/errors.hpp"
#include "distlift/rng.hpp"
#include "distlift/svg_plot.hpp"
#include "distlift/taskgen.hpp"
#include "distlift/training.hpp"

namespace distlift::experiments {
namespace {

namespace fs = std::filesystem;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const camera::DistortionParams& preset_params(const std::string& name) {
  const auto& presets = taskgen::distortion_presets();
  auto it = presets.find(name);
  if (it == presets.end())
    throw ConfigError("unknown distortion preset '" + name + "'");
  return it->second;
}

datagen::NoiseConfig noise_from(const config::DataConfig& data) {
  datagen::NoiseConfig noise;
  noise.sigma_px = data.sigma_px;
  noise.outlier_prob = data.outlier_prob;
  noise.outlier_max_px = data.outlier_max_px;
  return noise;
}

datagen::Dataset train_dataset(const config::Config& cfg) {
  return datagen::generate_dataset(skeleton::default_topology(),
                                   cfg.data.sequences, cfg.data.frames,
                                   noise_from(cfg.data), cfg.data.seed);
}

datagen::Dataset eval_dataset(const config::Config& cfg, std::uint64_t salt) {
  return datagen::generate_dataset(
      skeleton::default_topology(), cfg.experiment.eval_sequences,
      cfg.data.frames, noise_from(cfg.data),
      mix_seed(cfg.experiment.eval_seed, salt));
}

void prepare_run_dir(const ExperimentSpec& spec) {
  fs::create_directories(spec.out_dir);
  {
    std::ofstream out(spec.out_dir + "/spec.cfg", std::ios::binary);
    if (!out) throw IoError("cannot write " + spec.out_dir + "/spec.cfg");
    out << (spec.spec_text.empty() ? config::canonical_text(spec.cfg)
                                   : spec.spec_text);
  }
  std::ofstream out(spec.out_dir + "/config_hash.txt", std::ios::binary);
  if (!out) throw IoError("cannot write " + spec.out_dir + "/config_hash.txt");
  out << config::config_fingerprint(spec.cfg) << "\n";
}

struct EvalOutcome {
  double mpjpe = 0.0;
  double p_mpjpe = 0.0;
  double pckh = 0.0;
};

int eval_stride(const lifter::LifterParams& params,
                const config::EvalConfig& eval) {
  return eval.stride > 0 ? eval.stride : params.layout.cfg.frames;
}

// Concatenated predicted/ground-truth center frames across all records of the
// test set, with the 2D track distorted by d before lifting.
EvalOutcome evaluate(const lifter::LifterParams& params,
                     const datagen::Dataset& test,
                     const camera::DistortionParams& d,
                     const config::EvalConfig& eval) {
  if (test.empty()) throw InvalidInputError("evaluate: empty test set");
  const auto& topo = test.front().motion.topology;
  skeleton::Pose3DSequence pred_seq, gt_seq;
  for (const auto& rec : test) {
    auto task = taskgen::task_from_predicted(rec.tracks.at(eval.track),
                                             rec.motion.gt3d,
                                             rec.motion.intrinsics, d);
    task.window_len = params.layout.cfg.frames;
    auto batch = taskgen::eval_batch(task, topo, eval_stride(params, eval));
    for (const auto& sample : batch) {
      pred_seq.frames.push_back(
          lifter::forward(params, sample.window, sample.intrinsics));
      gt_seq.frames.push_back(sample.target);
    }
  }
  EvalOutcome out;
  out.mpjpe = metrics::mpjpe(pred_seq, gt_seq);
  out.p_mpjpe = metrics::p_mpjpe(pred_seq, gt_seq);
  out.pckh = metrics::pckh(pred_seq, gt_seq, topo, eval.pckh_ratio);
  return out;
}

void write_dynamics_csv(const std::string& path,
                        const std::vector<AdaptationCurve>& curves) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "init,scenario,preset,epoch,mpjpe\n";
  for (const auto& c : curves)
    for (std::size_t e = 0; e < c.mpjpe.size(); ++e)
      out << c.init << ',' << c.scenario << ',' << c.preset << ',' << e << ','
          << fmt17(c.mpjpe[e]) << '\n';
}

void write_dynamics_svg(const std::string& dir,
                        const std::vector<AdaptationCurve>& curves) {
  for (const std::string scenario : {"scenario1", "scenario2"}) {
    std::vector<svg::Series> series;
    for (const auto& c : curves) {
      if (c.scenario != scenario) continue;
      svg::Series s;
      s.name = c.init + " " + c.preset;
      for (std::size_t e = 0; e < c.mpjpe.size(); ++e)
        s.points.emplace_back(static_cast<double>(e), c.mpjpe[e]);
      series.push_back(std::move(s));
    }
    if (series.empty()) continue;
    svg::write_line_chart(dir + "/dynamics_" + scenario + ".svg",
                          "Held-out MPJPE during adaptation (" + scenario + ")",
                          "epoch", "MPJPE (mm)", series);
  }
}

constexpr std::uint64_t kAdaptDataSalt = 0x61646170'74646174ULL;
constexpr std::uint64_t kTestDataSalt = 0x65'76616c'64617461ULL;

}  // namespace

ExperimentSpec ExperimentSpec::from_file(const std::string& path,
                                         const std::string& out_dir) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open experiment spec " + path);
  std::ostringstream text;
  text << in.rdbuf();
  ExperimentSpec spec;
  spec.spec_text = text.str();
  spec.cfg = config::parse_config_text(spec.spec_text, path);
  spec.out_dir = out_dir;
  return spec;
}

metrics::MetricReport evaluate_params(const lifter::LifterParams& params,
                                      const datagen::Dataset& test,
                                      const camera::DistortionParams& d,
                                      const std::string& preset_name,
                                      const std::string& scenario_label,
                                      const config::EvalConfig& eval) {
  auto out = evaluate(params, test, d, eval);
  metrics::MetricReport report;
  report.add(preset_name, scenario_label, "mpjpe", out.mpjpe);
  report.add(preset_name, scenario_label, "p_mpjpe", out.p_mpjpe);
  report.add(preset_name, scenario_label, "pckh", out.pckh);
  return report;
}

double evaluate_mpjpe(const lifter::LifterParams& params,
                      const datagen::Dataset& test,
                      const camera::DistortionParams& d,
                      const config::EvalConfig& eval) {
  return evaluate(params, test, d, eval).mpjpe;
}

lifter::Batch adaptation_windows(const datagen::Dataset& data,
                                 const camera::DistortionParams& d,
                                 const config::EvalConfig& eval, int frames,
                                 int count) {
  if (data.empty())
    throw InvalidInputError("adaptation_windows: empty dataset");
  const auto& topo = data.front().motion.topology;
  lifter::Batch batch;
  for (const auto& rec : data) {
    auto task = taskgen::task_from_predicted(rec.tracks.at(eval.track),
                                             rec.motion.gt3d,
                                             rec.motion.intrinsics, d);
    task.window_len = frames;
    auto all = taskgen::eval_batch(task, topo, frames);
    for (auto& sample : all) {
      if (static_cast<int>(batch.size()) >= count) return batch;
      batch.push_back(std::move(sample));
    }
  }
  if (static_cast<int>(batch.size()) < count)
    throw InvalidInputError("adaptation_windows: dataset too small for " +
                            std::to_string(count) + " windows");
  return batch;
}

std::vector<datagen::Trajectory2D> distorted_tracks(
    const datagen::Dataset& data, const camera::DistortionParams& d,
    const std::string& track) {
  std::vector<datagen::Trajectory2D> out;
  out.reserve(data.size());
  for (const auto& rec : data) {
    auto task = taskgen::task_from_predicted(
        rec.tracks.at(track), rec.motion.gt3d, rec.motion.intrinsics, d);
    out.push_back(std::move(task.input));
  }
  return out;
}

metrics::MetricReport run_degradation_trend(const ExperimentSpec& spec) {
  const auto& cfg = spec.cfg;
  prepare_run_dir(spec);

  auto train = train_dataset(cfg);
  auto init = lifter::init_params(cfg.lifter);
  auto [params, report] = training::train_supervised(
      init, train, cfg.train, preset_params("none"), spec.out_dir);
  lifter::save_checkpoint(spec.out_dir + "/baseline.ckpt", params);
  training::write_train_report_csv(spec.out_dir + "/train_baseline.csv",
                                   report);

  auto test = eval_dataset(cfg, kTestDataSalt);
  std::vector<std::string> presets = {"none"};
  presets.insert(presets.end(), cfg.experiment.presets.begin(),
                 cfg.experiment.presets.end());

  metrics::MetricReport trend;
  svg::Series series{"mpjpe", {}};
  for (std::size_t i = 0; i < presets.size(); ++i) {
    double v = evaluate_mpjpe(params, test, preset_params(presets[i]),
                              cfg.eval);
    trend.add(presets[i], "undistorted_baseline", "mpjpe", v);
    series.points.emplace_back(static_cast<double>(i), v);
  }
  metrics::write_metric_csv(spec.out_dir + "/trend.csv", trend);
  svg::write_line_chart(spec.out_dir + "/trend.svg",
                        "Undistorted baseline vs camera distortion",
                        "camera index (0 = undistorted)", "MPJPE (mm)",
                        {series});
  return trend;
}

DynamicsResult run_adaptation_dynamics(const ExperimentSpec& spec) {
  const auto& cfg = spec.cfg;
  prepare_run_dir(spec);

  auto train = train_dataset(cfg);
  auto init = lifter::init_params(cfg.lifter);
  auto [pre_params, pre_report] = training::pretrain_random_distortion(
      init, train, cfg.train, spec.out_dir);
  lifter::save_checkpoint(spec.out_dir + "/pretrain.ckpt", pre_params);
  training::write_train_report_csv(spec.out_dir + "/train_pretrain.csv",
                                   pre_report);
  auto [meta_params, meta_report] =
      training::meta_train(train, cfg.train, pre_params, spec.out_dir);
  lifter::save_checkpoint(spec.out_dir + "/meta.ckpt", meta_params);
  training::write_train_report_csv(spec.out_dir + "/train_meta.csv",
                                   meta_report);

  auto test = eval_dataset(cfg, kTestDataSalt);
  auto adapt_data = eval_dataset(cfg, kAdaptDataSalt);
  const auto& topo = adapt_data.front().motion.topology;

  struct Init {
    const char* name;
    const lifter::LifterParams* params;
  };
  const Init inits[] = {{"meta", &meta_params}, {"pretrain", &pre_params}};

  DynamicsResult result;
  for (const auto& preset : cfg.experiment.presets) {
    const auto& d = preset_params(preset);
    auto labeled = adaptation_windows(adapt_data, d, cfg.eval,
                                      cfg.lifter.frames,
                                      cfg.experiment.scenario1_windows);
    auto tracks = distorted_tracks(adapt_data, d, cfg.eval.track);
    const auto& K = adapt_data.front().motion.intrinsics;

    for (const auto& ini : inits) {
      for (int scenario : {1, 2}) {
        AdaptationCurve curve;
        curve.init = ini.name;
        curve.scenario = "scenario" + std::to_string(scenario);
        curve.preset = preset;
        adaptation::EpochObserver observer =
            [&](int, const lifter::LifterParams& p) {
              curve.mpjpe.push_back(evaluate_mpjpe(p, test, d, cfg.eval));
            };
        adaptation::AdaptConfig acfg = cfg.adapt;
        acfg.scenario = scenario;
        if (scenario == 1) {
          adaptation::finetune_scenario1(*ini.params, labeled, acfg, observer);
        } else {
          acfg.lr = cfg.experiment.scenario2_lr;
          adaptation::iso_scenario2(*ini.params, tracks, K, topo, acfg,
                                    observer);
        }
        result.curves.push_back(std::move(curve));
      }
    }
  }

  write_dynamics_csv(spec.out_dir + "/dynamics.csv", result.curves);
  write_dynamics_svg(spec.out_dir, result.curves);
  return result;
}

metrics::MetricReport run_ablation(const ExperimentSpec& spec) {
  const auto& cfg = spec.cfg;
  prepare_run_dir(spec);

  auto train = train_dataset(cfg);
  auto init = lifter::init_params(cfg.lifter);
  auto test = eval_dataset(cfg, kTestDataSalt);
  auto adapt_data = eval_dataset(cfg, kAdaptDataSalt);

  if (cfg.experiment.presets.empty())
    throw ConfigError("ablation needs at least one preset");
  const std::string preset = cfg.experiment.presets.front();
  const auto& d = preset_params(preset);
  auto labeled = adaptation_windows(adapt_data, d, cfg.eval, cfg.lifter.frames,
                                    cfg.experiment.scenario1_windows);

  auto score_adapted = [&](const lifter::LifterParams& p) {
    adaptation::AdaptConfig acfg = cfg.adapt;
    acfg.scenario = 1;
    auto adapted = adaptation::finetune_scenario1(p, labeled, acfg);
    return evaluate_mpjpe(adapted.params, test, d, cfg.eval);
  };

  metrics::MetricReport report;
  svg::Series series{"mpjpe", {}};
  auto record = [&](const std::string& variant, double v) {
    report.add(preset, variant, "mpjpe", v);
    series.points.emplace_back(static_cast<double>(series.points.size()), v);
  };

  {
    auto [p, r] = training::train_supervised(init, train, cfg.train,
                                             preset_params("none"));
    record("supervised", score_adapted(p));
  }
  {
    training::TrainConfig variant = cfg.train;
    variant.inner_uniform_sampling = true;
    auto [p, r] = training::meta_train(train, variant, init);
    record("meta_uniform", score_adapted(p));
  }
  {
    auto [p, r] = training::meta_train(train, cfg.train, init);
    record("meta_stratified", score_adapted(p));
  }
  {
    auto [pre, r1] = training::pretrain_random_distortion(init, train,
                                                          cfg.train);
    auto [p, r2] = training::meta_train(train, cfg.train, pre, spec.out_dir);
    lifter::save_checkpoint(spec.out_dir + "/ablation_full.ckpt", p);
    record("pretrain_meta", score_adapted(p));
  }

  metrics::write_metric_csv(spec.out_dir + "/ablation.csv", report);
  svg::write_line_chart(spec.out_dir + "/ablation.svg",
                        "Ablation (adapted MPJPE on " + preset + ")",
                        "variant index", "MPJPE (mm)", {series});
  return report;
}

metrics::MetricReport run_generation_path_comparison(
    const ExperimentSpec& spec) {
  const auto& cfg = spec.cfg;
  prepare_run_dir(spec);

  auto train = train_dataset(cfg);
  auto init = lifter::init_params(cfg.lifter);
  auto test = eval_dataset(cfg, kTestDataSalt);

  struct Variant {
    const char* label;
    taskgen::TaskPath path;
    lifter::LifterParams params;
  };
  std::vector<Variant> variants = {
      {"path_predicted", taskgen::TaskPath::predicted, {}},
      {"path_gt3d", taskgen::TaskPath::gt3d, {}},
  };
  for (auto& v : variants) {
    training::TrainConfig tcfg = cfg.train;
    tcfg.path = v.path;
    auto [p, r] = training::pretrain_random_distortion(init, train, tcfg);
    v.params = std::move(p);
  }
  lifter::save_checkpoint(spec.out_dir + "/path_predicted.ckpt",
                          variants[0].params);

  if (cfg.experiment.presets.empty())
    throw ConfigError("path comparison needs at least one preset");

  metrics::MetricReport report;
  std::vector<svg::Series> series;
  for (const auto& v : variants) {
    svg::Series s{v.label, {}};
    double sum = 0.0;
    for (std::size_t i = 0; i < cfg.experiment.presets.size(); ++i) {
      double val = evaluate_mpjpe(
          v.params, test, preset_params(cfg.experiment.presets[i]), cfg.eval);
      s.points.emplace_back(static_cast<double>(i), val);
      sum += val;
    }
    report.add("mean", v.label, "mpjpe",
               sum / static_cast<double>(cfg.experiment.presets.size()));
    series.push_back(std::move(s));
  }

  metrics::write_metric_csv(spec.out_dir + "/path_comparison.csv", report);
  svg::write_line_chart(spec.out_dir + "/path_comparison.svg",
                        "Task-source comparison (MPJPE on jittered test)",
                        "camera index", "MPJPE (mm)", series);
  return report;
}

bool check_run_dir_complete(const std::string& dir,
                            std::vector<std::string>* missing) {
  std::vector<std::string> gaps;
  if (!fs::exists(fs::path(dir) / "spec.cfg")) gaps.push_back("spec.cfg");
  if (!fs::exists(fs::path(dir) / "config_hash.txt"))
    gaps.push_back("config_hash.txt");

  bool ckpt = false, csv = false, svg_file = false;
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      auto ext = entry.path().extension().string();
      if (ext == ".ckpt") ckpt = true;
      if (ext == ".csv") csv = true;
      if (ext == ".svg") svg_file = true;
    }
  }
  if (!ckpt) gaps.push_back("checkpoint (*.ckpt)");
  if (!csv) gaps.push_back("metrics (*.csv)");
  if (!svg_file) gaps.push_back("plot (*.svg)");

  if (missing) *missing = gaps;
  return gaps.empty();
}

}  // namespace distlift::experiments
