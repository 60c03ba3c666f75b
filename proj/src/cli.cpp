#include "distlift/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "distlift/adaptation.hpp"
#include "distlift/config.hpp"
#include "distlift/datagen.hpp"
#include "distlift/errors.hpp"
#include "distlift/experiments.hpp"
#include "distlift/lifter.hpp"
#include "distlift/metrics.hpp"
#include "distlift/svg_plot.hpp"
#include "distlift/taskgen.hpp"
#include "distlift/training.hpp"

namespace distlift::cli {
namespace {

namespace fs = std::filesystem;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string default_out_dir() {
  const char* env = std::getenv("DISTLIFT_OUT_DIR");
  return (env && *env) ? env : "out";
}

void ensure_parent_dir(const std::string& file) {
  auto parent = fs::path(file).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

// Flags shared by every subcommand; flag > config file > built-in default.
struct Common {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  CLI::Option* out_opt = nullptr;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* sub, const char* out_help) {
    sub->add_option("--config", config_path,
                    "config file (sectioned key=value)")
        ->check(CLI::ExistingFile);
    out_opt = sub->add_option("--out", out, out_help);
    seed_opt = sub->add_option("--seed", seed,
                               "override the [data] and [train] seeds");
  }

  config::Config load_config() const {
    config::Config cfg;
    if (!config_path.empty()) cfg = config::load_config_file(config_path);
    if (seed_opt->count() > 0) {
      cfg.data.seed = seed;
      cfg.train.seed = seed;
    }
    return cfg;
  }

  std::string out_dir() const {
    return out_opt->count() > 0 ? out : default_out_dir();
  }
  std::string out_file(const std::string& fallback_name) const {
    return out_opt->count() > 0 ? out
                                : default_out_dir() + "/" + fallback_name;
  }
};

const camera::DistortionParams& preset_by_name(const std::string& name) {
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

void write_adapt_curve_csv(const std::string& path,
                           const std::vector<double>& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,objective\n";
  for (std::size_t e = 0; e < curve.size(); ++e)
    out << e << ',' << fmt17(curve[e]) << '\n';
}

int run_gen_data(const Common& common) {
  auto cfg = common.load_config();
  auto path = common.out_file("dataset.ds");
  ensure_parent_dir(path);
  auto data = datagen::generate_dataset(skeleton::default_topology(),
                                        cfg.data.sequences, cfg.data.frames,
                                        noise_from(cfg.data), cfg.data.seed);
  datagen::save_dataset(path, data);
  std::cout << "wrote " << path << " (" << data.size() << " sequences, "
            << cfg.data.frames << " frames)\n";
  return 0;
}

int run_distort(const Common& common, const std::string& in_path,
                const std::string& preset, const std::vector<double>& custom,
                const std::string& track, const std::string& track_out) {
  camera::DistortionParams d;
  if (!custom.empty()) {
    d = {custom[0], custom[1], custom[2], custom[3], custom[4]};
  } else {
    d = preset_by_name(preset);
  }
  auto data = datagen::load_dataset(in_path);
  for (auto& rec : data) {
    auto it = rec.tracks.find(track);
    if (it == rec.tracks.end())
      throw InvalidInputError("dataset has no track '" + track + "'");
    datagen::Trajectory2D out = it->second;
    for (auto& p : out.points)
      p = camera::distort_pixel(rec.motion.intrinsics, d, p);
    rec.tracks[track_out] = std::move(out);
  }
  auto path = common.out_file("distorted.ds");
  ensure_parent_dir(path);
  datagen::save_dataset(path, data);
  std::cout << "wrote " << path << " (track '" << track_out << "')\n";
  return 0;
}

int run_pretrain(const Common& common, const std::string& data_path) {
  auto cfg = common.load_config();
  auto out = common.out_dir();
  fs::create_directories(out);
  auto data = datagen::load_dataset(data_path);
  auto init = lifter::init_params(cfg.lifter);
  auto [params, report] =
      training::pretrain_random_distortion(init, data, cfg.train, out);
  lifter::save_checkpoint(out + "/pretrain.ckpt", params);
  training::write_train_report_csv(out + "/train_pretrain.csv", report);
  std::cout << "wrote " << out << "/pretrain.ckpt (final loss "
            << fmt17(report.pretrain_loss.back()) << ")\n";
  return 0;
}

int run_meta_train(const Common& common, const std::string& data_path,
                   const std::string& init_path,
                   const std::string& resume_path) {
  auto cfg = common.load_config();
  auto out = common.out_dir();
  fs::create_directories(out);
  auto data = datagen::load_dataset(data_path);

  std::pair<lifter::LifterParams, training::TrainReport> result;
  if (!resume_path.empty()) {
    result = training::meta_train_resume(data, cfg.train, resume_path, out);
  } else {
    auto init = init_path.empty() ? lifter::init_params(cfg.lifter)
                                  : lifter::load_checkpoint(init_path).params;
    result = training::meta_train(data, cfg.train, init, out);
  }
  lifter::save_checkpoint(out + "/meta.ckpt", result.first);
  training::write_train_report_csv(out + "/train_meta.csv", result.second);
  std::cout << "wrote " << out << "/meta.ckpt (final task-test loss "
            << fmt17(result.second.task_test_loss.back()) << ")\n";
  return 0;
}

int run_adapt(const Common& common, const std::string& ckpt_path,
              const std::string& data_path, int scenario,
              const std::string& preset) {
  auto cfg = common.load_config();
  auto out = common.out_dir();
  fs::create_directories(out);
  auto params = lifter::load_checkpoint(ckpt_path).params;
  auto data = datagen::load_dataset(data_path);
  const auto& d = preset_by_name(preset.empty() ? cfg.eval.preset : preset);

  adaptation::AdaptConfig acfg = cfg.adapt;
  acfg.scenario = scenario;
  adaptation::AdaptResult result;
  if (scenario == 1) {
    auto labeled = experiments::adaptation_windows(
        data, d, cfg.eval, params.layout.cfg.frames,
        cfg.experiment.scenario1_windows);
    result = adaptation::finetune_scenario1(params, labeled, acfg);
  } else {
    acfg.lr = cfg.experiment.scenario2_lr;
    auto tracks = experiments::distorted_tracks(data, d, cfg.eval.track);
    result = adaptation::iso_scenario2(params, tracks,
                                       data.front().motion.intrinsics,
                                       data.front().motion.topology, acfg);
  }
  lifter::save_checkpoint(out + "/adapted.ckpt", result.params);
  write_adapt_curve_csv(out + "/adapt_curve.csv", result.curve);
  std::cout << "wrote " << out << "/adapted.ckpt (objective "
            << fmt17(result.curve.front()) << " -> "
            << fmt17(result.curve.back())
            << (result.diverged ? ", diverged; best kept" : "") << ")\n";
  return 0;
}

int run_eval(const Common& common, const std::string& ckpt_path,
             const std::string& data_path, const std::string& preset) {
  auto cfg = common.load_config();
  auto out = common.out_dir();
  fs::create_directories(out);
  auto params = lifter::load_checkpoint(ckpt_path).params;
  auto data = datagen::load_dataset(data_path);
  const std::string name = preset.empty() ? cfg.eval.preset : preset;
  auto report = experiments::evaluate_params(params, data,
                                             preset_by_name(name), name,
                                             "eval", cfg.eval);
  metrics::write_metric_csv(out + "/eval.csv", report);
  for (const auto& row : report.rows)
    std::cout << row.preset << ' ' << row.metric << ' ' << fmt17(row.value)
              << '\n';
  std::cout << "wrote " << out << "/eval.csv\n";
  return 0;
}

int run_exp(const Common& common, const std::string& spec_path) {
  auto probe = experiments::ExperimentSpec::from_file(spec_path, ".");
  const std::string name = probe.cfg.experiment.name;
  const std::string out = common.out_opt->count() > 0
                              ? common.out
                              : default_out_dir() + "/" + name;
  experiments::ExperimentSpec spec = std::move(probe);
  spec.out_dir = out;

  if (name == "degradation") {
    auto report = experiments::run_degradation_trend(spec);
    for (const auto& row : report.rows)
      std::cout << row.preset << ' ' << row.metric << ' ' << fmt17(row.value)
                << '\n';
  } else if (name == "dynamics") {
    auto result = experiments::run_adaptation_dynamics(spec);
    for (const auto& c : result.curves)
      std::cout << c.init << ' ' << c.scenario << ' ' << c.preset << ' '
                << fmt17(c.mpjpe.front()) << " -> " << fmt17(c.mpjpe.back())
                << '\n';
  } else if (name == "ablation") {
    auto report = experiments::run_ablation(spec);
    for (const auto& row : report.rows)
      std::cout << row.scenario << ' ' << fmt17(row.value) << '\n';
  } else if (name == "path_comparison") {
    auto report = experiments::run_generation_path_comparison(spec);
    for (const auto& row : report.rows)
      std::cout << row.preset << ' ' << row.scenario << ' '
                << fmt17(row.value) << '\n';
  } else {
    throw ConfigError(
        "unknown experiment name '" + name +
        "' (expected degradation, dynamics, ablation, or path_comparison)");
  }

  std::vector<std::string> missing;
  if (!experiments::check_run_dir_complete(out, &missing)) {
    std::string what = "run directory incomplete:";
    for (const auto& m : missing) what += " " + m;
    throw IoError(what);
  }
  std::cout << "run directory " << out << " complete\n";
  return 0;
}

int run_report(const Common& common, const std::vector<std::string>& csvs) {
  auto out = common.out_dir();
  fs::create_directories(out);
  metrics::MetricReport merged;
  for (const auto& path : csvs) {
    auto part = metrics::load_metric_csv(path);
    merged.rows.insert(merged.rows.end(), part.rows.begin(), part.rows.end());
  }
  metrics::write_metric_csv(out + "/merged.csv", merged);

  std::vector<svg::Series> series;
  for (const auto& row : merged.rows) {
    const std::string key = row.scenario + "/" + row.metric;
    svg::Series* s = nullptr;
    for (auto& existing : series)
      if (existing.name == key) s = &existing;
    if (!s) {
      series.push_back({key, {}});
      s = &series.back();
    }
    s->points.emplace_back(static_cast<double>(s->points.size()), row.value);
  }
  svg::write_line_chart(out + "/report.svg", "Merged metric report",
                        "row index", "value", series);
  std::cout << "wrote " << out << "/merged.csv and " << out << "/report.svg ("
            << merged.rows.size() << " rows)\n";
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"distlift: distortion-aware 3D human-pose lifting"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  int rc = 0;

  auto* gen = app.add_subcommand("gen-data",
                                 "generate a synthetic dataset file");
  Common gen_common;
  gen_common.attach(gen, "output dataset file");
  gen->callback([&] { rc = run_gen_data(gen_common); });

  auto* dis = app.add_subcommand(
      "distort", "apply a distortion model to a dataset's 2D track");
  Common dis_common;
  dis_common.attach(dis, "output dataset file");
  std::string dis_in, dis_preset, dis_track = "detector",
                      dis_track_out = "distorted";
  std::vector<double> dis_params;
  dis->add_option("--in", dis_in, "input dataset file")
      ->required()
      ->check(CLI::ExistingFile);
  auto* preset_opt =
      dis->add_option("--preset", dis_preset, "named distortion preset");
  auto* params_opt = dis->add_option("--params", dis_params,
                                     "custom k1,k2,k3,p1,p2")
                         ->delimiter(',')
                         ->expected(5);
  preset_opt->excludes(params_opt);
  dis->add_option("--track", dis_track, "input track name");
  dis->add_option("--track-out", dis_track_out, "name for the new track");
  dis->callback([&] {
    if (preset_opt->count() == 0 && params_opt->count() == 0)
      throw CLI::ValidationError("distort",
                                 "one of --preset / --params is required");
    rc = run_distort(dis_common, dis_in, dis_preset, dis_params, dis_track,
                     dis_track_out);
  });

  auto* pre = app.add_subcommand(
      "pretrain", "supervised training on uniformly distorted tasks");
  Common pre_common;
  pre_common.attach(pre, "output directory");
  std::string pre_data;
  pre->add_option("--data", pre_data, "training dataset file")
      ->required()
      ->check(CLI::ExistingFile);
  pre->callback([&] { rc = run_pretrain(pre_common, pre_data); });

  auto* meta = app.add_subcommand("meta-train",
                                  "meta-train the lifter initialization");
  Common meta_common;
  meta_common.attach(meta, "output directory");
  std::string meta_data, meta_init, meta_resume;
  meta->add_option("--data", meta_data, "training dataset file")
      ->required()
      ->check(CLI::ExistingFile);
  auto* init_opt = meta->add_option("--init", meta_init,
                                    "checkpoint to start from")
                       ->check(CLI::ExistingFile);
  auto* resume_opt =
      meta->add_option("--resume", meta_resume,
                       "mid-run checkpoint to continue (restores optimizer "
                       "and RNG state)")
          ->check(CLI::ExistingFile);
  init_opt->excludes(resume_opt);
  meta->callback([&] {
    rc = run_meta_train(meta_common, meta_data, meta_init, meta_resume);
  });

  auto* adapt = app.add_subcommand("adapt",
                                   "test-time adaptation of a checkpoint");
  Common adapt_common;
  adapt_common.attach(adapt, "output directory");
  std::string adapt_ckpt, adapt_data, adapt_preset;
  int adapt_scenario = 1;
  adapt->add_option("--ckpt", adapt_ckpt, "checkpoint to adapt")
      ->required()
      ->check(CLI::ExistingFile);
  adapt->add_option("--data", adapt_data, "target-environment dataset file")
      ->required()
      ->check(CLI::ExistingFile);
  adapt->add_option("--scenario", adapt_scenario,
                    "1 = labeled fine-tuning, 2 = label-free bone-length")
      ->check(CLI::IsMember({1, 2}));
  adapt->add_option("--preset", adapt_preset,
                    "distortion preset of the target camera");
  adapt->callback([&] {
    rc = run_adapt(adapt_common, adapt_ckpt, adapt_data, adapt_scenario,
                   adapt_preset);
  });

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  Common ev_common;
  ev_common.attach(ev, "output directory");
  std::string ev_ckpt, ev_data, ev_preset;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint to evaluate")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data, "test dataset file")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--preset", ev_preset,
                 "distortion preset applied to the test 2D track");
  ev->callback([&] { rc = run_eval(ev_common, ev_ckpt, ev_data, ev_preset); });

  auto* exp = app.add_subcommand("exp", "scripted experiments");
  exp->require_subcommand(1);
  auto* exp_run = exp->add_subcommand("run", "run an experiment spec file");
  Common exp_common;
  exp_common.attach(exp_run, "run directory");
  std::string exp_spec;
  exp_run->add_option("spec", exp_spec, "experiment spec file")
      ->required()
      ->check(CLI::ExistingFile);
  exp_run->callback([&] { rc = run_exp(exp_common, exp_spec); });

  auto* rep = app.add_subcommand("report",
                                 "merge metric CSVs and emit an SVG chart");
  Common rep_common;
  rep_common.attach(rep, "output directory");
  std::vector<std::string> rep_csvs;
  rep->add_option("csv", rep_csvs, "metric CSV files to merge")
      ->required()
      ->check(CLI::ExistingFile);
  rep->callback([&] { rc = run_report(rep_common, rep_csvs); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return rc;
}

}  // namespace distlift::cli
