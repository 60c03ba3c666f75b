#include "distlift/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "distlift/errors.hpp"
#include "distlift/hash.hpp"
#include "distlift/rng.hpp"

namespace distlift::training {

namespace {

constexpr std::uint64_t kPretrainSalt = 0x707265747261696eULL;
constexpr std::uint64_t kMetaSalt = 0x6d6574615f726e67ULL;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const skeleton::SkeletonTopology& dataset_topology(
    const datagen::Dataset& dataset) {
  if (dataset.empty()) throw InvalidInputError("training: empty dataset");
  return dataset.front().motion.topology;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(alpha >= 0.0)) throw InvalidInputError("train config: alpha < 0");
  if (!(beta > 0.0)) throw InvalidInputError("train config: beta must be > 0");
  if (meta_batch < 1) throw InvalidInputError("train config: meta_batch < 1");
  if (batch_size < 2) throw InvalidInputError("train config: batch_size < 2");
  if (epochs < 0) throw InvalidInputError("train config: epochs < 0");
  if (!(lr_decay > 0.0) || lr_decay > 1.0)
    throw InvalidInputError("train config: lr_decay must be in (0, 1]");
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0))
    throw InvalidInputError("train config: lambda bounds must be positive");
  if (steps_per_epoch < 1)
    throw InvalidInputError("train config: steps_per_epoch < 1");
  if (support_windows < 1 || query_windows < 1)
    throw InvalidInputError("train config: need windows on both task sides");
}

taskgen::SamplerConfig TrainConfig::sampler() const {
  taskgen::SamplerConfig s;
  s.lambda1 = lambda1;
  s.lambda2 = lambda2;
  s.n_tasks = meta_batch;
  return s;
}

std::string config_hash(const TrainConfig& cfg) {
  std::ostringstream out;
  out << "alpha=" << fmt(cfg.alpha) << ";beta=" << fmt(cfg.beta)
      << ";meta_batch=" << cfg.meta_batch << ";batch_size=" << cfg.batch_size
      << ";epochs=" << cfg.epochs << ";lr_decay=" << fmt(cfg.lr_decay)
      << ";lambda1=" << fmt(cfg.lambda1) << ";lambda2=" << fmt(cfg.lambda2)
      << ";seed=" << cfg.seed << ";steps_per_epoch=" << cfg.steps_per_epoch
      << ";support_windows=" << cfg.support_windows
      << ";query_windows=" << cfg.query_windows
      << ";path=" << (cfg.path == taskgen::TaskPath::predicted ? "predicted" : "gt3d")
      << ";track=" << cfg.track
      << ";outer_plain_sgd=" << (cfg.outer_plain_sgd ? 1 : 0)
      << ";reuse_inner_tasks=" << (cfg.reuse_inner_tasks ? 1 : 0)
      << ";inner_uniform_sampling=" << (cfg.inner_uniform_sampling ? 1 : 0);
  return fnv1a_hex(out.str());
}

void write_train_report_csv(const std::string& path,
                            const TrainReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "# seed=" << report.seed << " config=" << report.config_hash << "\n";
  out << "epoch,pretrain_loss,task_train_loss,task_test_loss\n";
  const std::size_t rows =
      std::max({report.pretrain_loss.size(), report.task_train_loss.size(),
                report.task_test_loss.size()});
  for (std::size_t e = 0; e < rows; ++e) {
    out << e;
    out << ',' << (e < report.pretrain_loss.size() ? fmt(report.pretrain_loss[e]) : "");
    out << ',' << (e < report.task_train_loss.size() ? fmt(report.task_train_loss[e]) : "");
    out << ',' << (e < report.task_test_loss.size() ? fmt(report.task_test_loss[e]) : "");
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

void Adam::init(std::size_t n) {
  m.assign(n, 0.0);
  v.assign(n, 0.0);
  t = 0;
}

void Adam::step(std::vector<double>& x, const std::vector<double>& g,
                double lr) {
  if (x.size() != g.size() || x.size() != m.size())
    throw InvalidInputError("adam: size mismatch");
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < x.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    x[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

namespace {

using TaskProvider =
    std::function<std::vector<taskgen::DistortionTask>(RngStream&)>;

// Shared pretraining-style loop: every provided task contributes one Adam
// update (in task order) on its combined support+query windows.
std::pair<lifter::LifterParams, TrainReport> supervised_loop(
    const lifter::LifterParams& init, const datagen::Dataset& dataset,
    const TrainConfig& cfg, const TaskProvider& provider,
    const std::string& checkpoint_dir) {
  cfg.validate();
  const auto& topo = dataset_topology(dataset);
  const auto start = std::chrono::steady_clock::now();

  lifter::LifterParams params = init;
  lifter::LifterParams last_good = init;
  Adam opt;
  opt.init(params.size());
  RngStream rng(mix_seed(cfg.seed, kPretrainSalt));

  TrainReport report;
  report.seed = cfg.seed;
  report.config_hash = config_hash(cfg);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.beta * std::pow(cfg.lr_decay, epoch);
    double loss_sum = 0.0;
    long updates = 0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      const auto tasks = provider(rng);
      for (const auto& task : tasks) {
        std::vector<int> starts = task.support_starts;
        starts.insert(starts.end(), task.query_starts.begin(),
                      task.query_starts.end());
        const auto batch = taskgen::batch_from_starts(task, starts, topo);
        lifter::GradResult g;
        try {
          g = lifter::grad(params, batch);
        } catch (const NumericError&) {
          if (!checkpoint_dir.empty())
            lifter::save_checkpoint(
                checkpoint_dir + "/pretrain_lastgood.ckpt", last_good);
          throw NumericError(
              "pretraining diverged; last finite-loss parameters " +
              (checkpoint_dir.empty()
                   ? std::string("were discarded (no checkpoint dir)")
                   : "saved to " + checkpoint_dir + "/pretrain_lastgood.ckpt"));
        }
        last_good = params;
        opt.step(params.values, g.grad, lr);
        loss_sum += g.loss;
        ++updates;
      }
    }
    report.pretrain_loss.push_back(loss_sum / static_cast<double>(updates));
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return {std::move(params), std::move(report)};
}

taskgen::WindowSamplerConfig window_config(const TrainConfig& cfg, int frames,
                                           int support, int query) {
  taskgen::WindowSamplerConfig ws;
  ws.window_len = frames;
  ws.support_windows = support;
  ws.query_windows = query;
  ws.path = cfg.path;
  ws.track = cfg.track;
  return ws;
}

}  // namespace

std::pair<lifter::LifterParams, TrainReport> pretrain_random_distortion(
    const lifter::LifterParams& init, const datagen::Dataset& dataset,
    const TrainConfig& cfg, const std::string& checkpoint_dir) {
  const int frames = init.layout.cfg.frames;
  const auto ws = window_config(cfg, frames, cfg.batch_size - cfg.batch_size / 2,
                                cfg.batch_size / 2);
  const auto sampler = cfg.sampler();
  return supervised_loop(
      init, dataset, cfg,
      [&dataset, ws, sampler](RngStream& rng) {
        return taskgen::make_meta_batch(dataset, ws, sampler,
                                        taskgen::SampleMode::uniform, rng);
      },
      checkpoint_dir);
}

std::pair<lifter::LifterParams, TrainReport> train_supervised(
    const lifter::LifterParams& init, const datagen::Dataset& dataset,
    const TrainConfig& cfg, const camera::DistortionParams& d,
    const std::string& checkpoint_dir) {
  const int frames = init.layout.cfg.frames;
  const auto ws = window_config(cfg, frames, cfg.batch_size - cfg.batch_size / 2,
                                cfg.batch_size / 2);
  auto provider = [&dataset, ws, d,
                   n = cfg.meta_batch](RngStream& rng) {
    const std::uint64_t salt = rng.raw();
    std::vector<taskgen::DistortionTask> tasks;
    tasks.reserve(n);
    for (int i = 1; i <= n; ++i) {
      RngStream task_rng(mix_seed(salt, static_cast<std::uint64_t>(i)));
      const auto& rec = dataset[task_rng.uniform_index(dataset.size())];
      taskgen::DistortionTask task;
      if (ws.path == taskgen::TaskPath::predicted) {
        const auto it = rec.tracks.find(ws.track);
        if (it == rec.tracks.end())
          throw InvalidInputError("train_supervised: no track named " + ws.track);
        task = taskgen::task_from_predicted(it->second, rec.motion.gt3d,
                                            rec.motion.intrinsics, d);
      } else {
        task = taskgen::task_from_gt3d(rec.motion.gt3d, rec.motion.intrinsics,
                                       d, {});
      }
      const int max_start = task.input.frames - ws.window_len;
      if (max_start < 0 ||
          max_start + 1 < ws.support_windows + ws.query_windows)
        throw InvalidInputError(
            "train_supervised: sequence too short for requested windows");
      task.window_len = ws.window_len;
      std::vector<int> taken;
      for (int k = 0; k < ws.support_windows + ws.query_windows; ++k) {
        int s;
        do {
          s = static_cast<int>(task_rng.uniform_index(max_start + 1));
        } while (std::find(taken.begin(), taken.end(), s) != taken.end());
        taken.push_back(s);
        (k < ws.support_windows ? task.support_starts : task.query_starts)
            .push_back(s);
      }
      tasks.push_back(std::move(task));
    }
    return tasks;
  };
  return supervised_loop(init, dataset, cfg, provider, checkpoint_dir);
}

lifter::LifterParams inner_adapt(const lifter::LifterParams& params,
                                 const lifter::Batch& support, double alpha) {
  const auto g = lifter::grad(params, support);
  lifter::LifterParams adapted = params;
  for (std::size_t i = 0; i < adapted.values.size(); ++i)
    adapted.values[i] -= alpha * g.grad[i];
  return adapted;
}

lifter::LifterParams meta_step(
    const lifter::LifterParams& params,
    const std::vector<taskgen::DistortionTask>& train_tasks,
    const std::vector<taskgen::DistortionTask>& test_tasks,
    const skeleton::SkeletonTopology& topo, const TrainConfig& cfg, double lr,
    Adam& opt, StepLosses* losses) {
  if (train_tasks.empty() || train_tasks.size() != test_tasks.size())
    throw InvalidInputError("meta_step: task batch size mismatch");

  std::vector<double> grad_sum(params.size(), 0.0);
  double train_loss = 0.0, test_loss = 0.0;
  for (std::size_t i = 0; i < train_tasks.size(); ++i) {
    const auto support = taskgen::support_batch(train_tasks[i], topo);
    const auto query = taskgen::query_batch(test_tasks[i], topo);
    const auto mg = lifter::meta_grad(params, support, query, cfg.alpha);
    for (std::size_t k = 0; k < grad_sum.size(); ++k)
      grad_sum[k] += mg.grad[k];
    train_loss += mg.support_loss;
    test_loss += mg.query_loss;
  }
  if (losses) {
    losses->task_train = train_loss / static_cast<double>(train_tasks.size());
    losses->task_test = test_loss / static_cast<double>(train_tasks.size());
  }

  lifter::LifterParams out = params;
  if (cfg.outer_plain_sgd) {
    for (std::size_t k = 0; k < out.values.size(); ++k)
      out.values[k] -= lr * grad_sum[k];
  } else {
    opt.step(out.values, grad_sum, lr);
  }
  return out;
}

namespace {

std::pair<lifter::LifterParams, TrainReport> meta_loop(
    const datagen::Dataset& dataset, const TrainConfig& cfg,
    lifter::LifterParams params, Adam opt, RngStream rng, int start_epoch,
    const std::string& checkpoint_dir) {
  cfg.validate();
  const auto& topo = dataset_topology(dataset);
  const auto ws = window_config(cfg, params.layout.cfg.frames,
                                cfg.support_windows, cfg.query_windows);
  const auto sampler = cfg.sampler();
  const auto start = std::chrono::steady_clock::now();

  TrainReport report;
  report.seed = cfg.seed;
  report.config_hash = config_hash(cfg);

  lifter::LifterParams last_good = params;
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.beta * std::pow(cfg.lr_decay, epoch);
    double train_sum = 0.0, test_sum = 0.0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      const auto strat = taskgen::make_meta_batch(
          dataset, ws, sampler,
          cfg.inner_uniform_sampling ? taskgen::SampleMode::uniform
                                     : taskgen::SampleMode::stratified,
          rng);
      const auto tested =
          cfg.reuse_inner_tasks
              ? strat
              : taskgen::make_meta_batch(dataset, ws, sampler,
                                         taskgen::SampleMode::uniform, rng);
      StepLosses losses;
      try {
        params = meta_step(params, strat, tested, topo, cfg, lr, opt, &losses);
      } catch (const NumericError&) {
        if (!checkpoint_dir.empty())
          lifter::save_checkpoint(checkpoint_dir + "/meta_lastgood.ckpt",
                                  last_good);
        throw NumericError(
            "meta-training diverged; last finite-loss parameters " +
            (checkpoint_dir.empty()
                 ? std::string("were discarded (no checkpoint dir)")
                 : "saved to " + checkpoint_dir + "/meta_lastgood.ckpt"));
      }
      last_good = params;
      train_sum += losses.task_train;
      test_sum += losses.task_test;
    }
    report.task_train_loss.push_back(train_sum / cfg.steps_per_epoch);
    report.task_test_loss.push_back(test_sum / cfg.steps_per_epoch);

    if (!checkpoint_dir.empty()) {
      lifter::save_checkpoint(
          checkpoint_dir + "/meta_epoch_" + std::to_string(epoch + 1) + ".ckpt",
          params, {{"adam.m", opt.m}, {"adam.v", opt.v}},
          {{"epoch", std::to_string(epoch + 1)},
           {"adam_t", std::to_string(opt.t)},
           {"rng", rng.save_state()}});
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return {std::move(params), std::move(report)};
}

}  // namespace

std::pair<lifter::LifterParams, TrainReport> meta_train(
    const datagen::Dataset& dataset, const TrainConfig& cfg,
    const lifter::LifterParams& init, const std::string& checkpoint_dir) {
  Adam opt;
  opt.init(init.size());
  return meta_loop(dataset, cfg, init, std::move(opt),
                   RngStream(mix_seed(cfg.seed, kMetaSalt)), 0, checkpoint_dir);
}

std::pair<lifter::LifterParams, TrainReport> meta_train_resume(
    const datagen::Dataset& dataset, const TrainConfig& cfg,
    const std::string& checkpoint_path, const std::string& checkpoint_dir) {
  auto ckpt = lifter::load_checkpoint(checkpoint_path);
  if (!ckpt.extra.count("adam.m") || !ckpt.extra.count("adam.v") ||
      !ckpt.meta.count("epoch") || !ckpt.meta.count("adam_t") ||
      !ckpt.meta.count("rng"))
    throw ParseError(checkpoint_path + ": not a meta-training checkpoint");

  Adam opt;
  opt.m = ckpt.extra.at("adam.m");
  opt.v = ckpt.extra.at("adam.v");
  opt.t = std::stol(ckpt.meta.at("adam_t"));
  if (opt.m.size() != ckpt.params.size() || opt.v.size() != ckpt.params.size())
    throw ParseError(checkpoint_path + ": optimizer state size mismatch");

  RngStream rng(0);
  rng.load_state(ckpt.meta.at("rng"));
  const int start_epoch = std::stoi(ckpt.meta.at("epoch"));
  if (start_epoch > cfg.epochs)
    throw InvalidInputError("meta_train_resume: checkpoint is past cfg.epochs");
  return meta_loop(dataset, cfg, std::move(ckpt.params), std::move(opt),
                   std::move(rng), start_epoch, checkpoint_dir);
}

}  // namespace distlift::training
