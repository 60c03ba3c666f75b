#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "distlift/camera.hpp"
#include "distlift/datagen.hpp"
#include "distlift/lifter.hpp"
#include "distlift/taskgen.hpp"

namespace distlift::training {

struct TrainConfig {
  double alpha = 0.1;    // task-level (inner) SGD step
  double beta = 0.001;   // meta/outer and pretraining learning rate
  int meta_batch = 5;    // tasks per meta step
  int batch_size = 128;  // windows per pretraining update (per task)
  int epochs = 8;
  double lr_decay = 0.95;  // per-epoch multiplicative decay
  double lambda1 = 5.0;
  double lambda2 = 0.5;
  std::uint64_t seed = 0;

  int steps_per_epoch = 8;
  int support_windows = 8;  // task-level training windows per task
  int query_windows = 8;    // task-level testing windows per task
  taskgen::TaskPath path = taskgen::TaskPath::predicted;
  std::string track = "detector";

  bool outer_plain_sgd = false;    // replace the outer Adam step with plain SGD
  bool reuse_inner_tasks = false;  // evaluate the outer loss on the inner
                                   // tasks' query windows instead of fresh
                                   // uniformly-sampled tasks
  bool inner_uniform_sampling = false;  // draw task-level training batches
                                        // uniformly instead of stratified
                                        // (ablation variant)

  void validate() const;
  taskgen::SamplerConfig sampler() const;
};

struct TrainReport {
  std::vector<double> pretrain_loss;    // per epoch, pretraining runs
  std::vector<double> task_train_loss;  // per epoch, support loss at theta
  std::vector<double> task_test_loss;   // per epoch, query loss after the
                                        // inner step
  double wall_seconds = 0.0;  // excluded from the CSV (kept in a sidecar)
  std::uint64_t seed = 0;
  std::string config_hash;
};

// Epoch/phase/loss rows; wall time deliberately left out so reports from
// identical seeds are byte-identical.
void write_train_report_csv(const std::string& path, const TrainReport& report);

struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<double> m, v;
  long t = 0;

  void init(std::size_t n);
  void step(std::vector<double>& x, const std::vector<double>& g, double lr);
};

// Supervised training on uniformly random distorted tasks: per step, a batch
// of tasks is drawn and each task contributes one Adam update in task order.
// On numeric divergence the last finite-loss parameters are written to
// checkpoint_dir (when given) and NumericError propagates.
std::pair<lifter::LifterParams, TrainReport> pretrain_random_distortion(
    const lifter::LifterParams& init, const datagen::Dataset& dataset,
    const TrainConfig& cfg, const std::string& checkpoint_dir = "");

// Same loop with one fixed camera for every task (e.g. an undistorted
// baseline or a single-preset specialist).
std::pair<lifter::LifterParams, TrainReport> train_supervised(
    const lifter::LifterParams& init, const datagen::Dataset& dataset,
    const TrainConfig& cfg, const camera::DistortionParams& d,
    const std::string& checkpoint_dir = "");

// Exactly one SGD step on the support batch.
lifter::LifterParams inner_adapt(const lifter::LifterParams& params,
                                 const lifter::Batch& support, double alpha);

struct StepLosses {
  double task_train = 0.0;  // mean support loss over the batch's tasks
  double task_test = 0.0;   // mean query loss after each task's inner step
};

// One outer update: sums the per-task meta-gradients (task i adapts on
// train_tasks[i]'s support windows, is scored on test_tasks[i]'s query
// windows) and applies Adam — or plain SGD when cfg.outer_plain_sgd — at lr.
lifter::LifterParams meta_step(
    const lifter::LifterParams& params,
    const std::vector<taskgen::DistortionTask>& train_tasks,
    const std::vector<taskgen::DistortionTask>& test_tasks,
    const skeleton::SkeletonTopology& topo, const TrainConfig& cfg, double lr,
    Adam& opt, StepLosses* losses = nullptr);

// Full meta-training loop: stratified task batches for task-level training,
// fresh uniform batches for task-level testing (or the same tasks when
// cfg.reuse_inner_tasks).  Per-epoch learning-rate decay and checkpoints
// (meta_epoch_<n>.ckpt in checkpoint_dir, carrying optimizer and RNG state).
std::pair<lifter::LifterParams, TrainReport> meta_train(
    const datagen::Dataset& dataset, const TrainConfig& cfg,
    const lifter::LifterParams& init, const std::string& checkpoint_dir = "");

// Continues a meta_train run from one of its checkpoints; the completed run
// is bit-identical to the uninterrupted one.
std::pair<lifter::LifterParams, TrainReport> meta_train_resume(
    const datagen::Dataset& dataset, const TrainConfig& cfg,
    const std::string& checkpoint_path, const std::string& checkpoint_dir = "");

std::string config_hash(const TrainConfig& cfg);

}  // namespace distlift::training
