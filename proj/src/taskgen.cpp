#include "distlift/taskgen.hpp"

#include <algorithm>

#include "distlift/errors.hpp"

namespace distlift::taskgen {

void SamplerConfig::validate() const {
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0))
    throw InvalidInputError("sampler config: lambda bounds must be positive");
  if (n_tasks < 1) throw InvalidInputError("sampler config: n_tasks < 1");
}

void WindowSamplerConfig::validate() const {
  if (window_len < 1) throw InvalidInputError("window sampler: window_len < 1");
  if (support_windows < 1 || query_windows < 1)
    throw InvalidInputError("window sampler: need at least one window per side");
}

camera::DistortionParams sample_uniform(const SamplerConfig& cfg,
                                        RngStream& rng) {
  cfg.validate();
  camera::DistortionParams d;
  d.k1 = rng.uniform(-cfg.lambda1, cfg.lambda1);
  d.k2 = rng.uniform(-cfg.lambda1, cfg.lambda1);
  d.k3 = rng.uniform(-cfg.lambda1, cfg.lambda1);
  d.p1 = rng.uniform(-cfg.lambda2, cfg.lambda2);
  d.p2 = rng.uniform(-cfg.lambda2, cfg.lambda2);
  return d;
}

double sample_k1_stratified(const SamplerConfig& cfg, int i, RngStream& rng) {
  cfg.validate();
  if (i < 1 || i > cfg.n_tasks)
    throw InvalidInputError("stratified sample: bin index out of range");
  const double n = static_cast<double>(cfg.n_tasks);
  const double u = (static_cast<double>(i - 1) + rng.uniform()) / n;
  return -cfg.lambda1 + 2.0 * cfg.lambda1 * u;
}

camera::DistortionParams sample_stratified(const SamplerConfig& cfg, int i,
                                           RngStream& rng) {
  camera::DistortionParams d;
  d.k1 = sample_k1_stratified(cfg, i, rng);
  d.k2 = rng.uniform(-cfg.lambda1, cfg.lambda1);
  d.k3 = rng.uniform(-cfg.lambda1, cfg.lambda1);
  d.p1 = rng.uniform(-cfg.lambda2, cfg.lambda2);
  d.p2 = rng.uniform(-cfg.lambda2, cfg.lambda2);
  return d;
}

DistortionTask task_from_predicted(const datagen::Trajectory2D& traj,
                                   const skeleton::Pose3DSequence& gt,
                                   const camera::Intrinsics& K,
                                   const camera::DistortionParams& d) {
  if (traj.frames != gt.frame_count() ||
      traj.joints != gt.joint_count())
    throw InvalidInputError("task_from_predicted: 2D/3D shape mismatch");
  DistortionTask task;
  task.input = traj;
  for (auto& p : task.input.points) p = camera::distort_pixel(K, d, p);
  task.target = gt;
  task.params = d;
  task.intrinsics = K;
  return task;
}

DistortionTask task_from_gt3d(const skeleton::Pose3DSequence& gt,
                              const camera::Intrinsics& K,
                              const camera::DistortionParams& d,
                              const datagen::NoiseConfig& /*noise*/) {
  return task_from_predicted(datagen::project_points(gt, K), gt, K, d);
}

namespace {

std::vector<int> draw_disjoint_starts(int n, int max_start, RngStream& rng,
                                      std::vector<int>& taken) {
  std::vector<int> starts;
  starts.reserve(n);
  for (int k = 0; k < n; ++k) {
    int s = 0;
    int attempts = 0;
    do {
      s = static_cast<int>(rng.uniform_index(max_start + 1));
      if (++attempts > 10000)
        throw InvalidInputError(
            "window sampler: sequence too short for disjoint windows");
    } while (std::find(taken.begin(), taken.end(), s) != taken.end());
    taken.push_back(s);
    starts.push_back(s);
  }
  return starts;
}

}  // namespace

std::vector<DistortionTask> make_meta_batch(const datagen::Dataset& dataset,
                                            const WindowSamplerConfig& ws,
                                            const SamplerConfig& cfg,
                                            SampleMode mode, RngStream& rng) {
  cfg.validate();
  ws.validate();
  if (dataset.empty())
    throw InvalidInputError("make_meta_batch: empty dataset");

  const std::uint64_t batch_salt = rng.raw();
  std::vector<DistortionTask> tasks;
  tasks.reserve(cfg.n_tasks);
  for (int i = 1; i <= cfg.n_tasks; ++i) {
    RngStream task_rng(mix_seed(batch_salt, static_cast<std::uint64_t>(i)));
    const camera::DistortionParams d =
        mode == SampleMode::stratified ? sample_stratified(cfg, i, task_rng)
                                       : sample_uniform(cfg, task_rng);

    const auto& rec =
        dataset[task_rng.uniform_index(dataset.size())];
    DistortionTask task;
    if (ws.path == TaskPath::predicted) {
      const auto it = rec.tracks.find(ws.track);
      if (it == rec.tracks.end())
        throw InvalidInputError("make_meta_batch: no track named " + ws.track);
      task = task_from_predicted(it->second, rec.motion.gt3d,
                                 rec.motion.intrinsics, d);
    } else {
      task = task_from_gt3d(rec.motion.gt3d, rec.motion.intrinsics, d, {});
    }

    const int max_start = task.input.frames - ws.window_len;
    if (max_start < 0 ||
        max_start + 1 < ws.support_windows + ws.query_windows)
      throw InvalidInputError(
          "make_meta_batch: sequence too short for requested windows");
    task.window_len = ws.window_len;
    std::vector<int> taken;
    task.support_starts =
        draw_disjoint_starts(ws.support_windows, max_start, task_rng, taken);
    task.query_starts =
        draw_disjoint_starts(ws.query_windows, max_start, task_rng, taken);
    tasks.push_back(std::move(task));
  }
  return tasks;
}

lifter::TrainingSample window_sample(const DistortionTask& task, int start,
                                     const skeleton::SkeletonTopology& topo) {
  const int L = task.window_len;
  if (L < 1) throw InvalidInputError("window_sample: task has no window length");
  if (start < 0 || start + L > task.input.frames)
    throw InvalidInputError("window_sample: start out of range");

  lifter::TrainingSample s;
  s.window.frames = L;
  s.window.joints = task.input.joints;
  s.window.points.assign(
      task.input.points.begin() +
          static_cast<std::size_t>(start) * task.input.joints,
      task.input.points.begin() +
          static_cast<std::size_t>(start + L) * task.input.joints);
  s.target = skeleton::root_relative(task.target.frames[start + L / 2], topo);
  s.intrinsics = task.intrinsics;
  return s;
}

lifter::Batch batch_from_starts(const DistortionTask& task,
                                const std::vector<int>& starts,
                                const skeleton::SkeletonTopology& topo) {
  lifter::Batch batch;
  batch.reserve(starts.size());
  for (int s : starts) batch.push_back(window_sample(task, s, topo));
  return batch;
}

lifter::Batch support_batch(const DistortionTask& task,
                            const skeleton::SkeletonTopology& topo) {
  return batch_from_starts(task, task.support_starts, topo);
}

lifter::Batch query_batch(const DistortionTask& task,
                          const skeleton::SkeletonTopology& topo) {
  return batch_from_starts(task, task.query_starts, topo);
}

lifter::Batch eval_batch(const DistortionTask& task,
                         const skeleton::SkeletonTopology& topo, int stride) {
  if (stride < 1) throw InvalidInputError("eval_batch: stride < 1");
  if (task.window_len < 1)
    throw InvalidInputError("eval_batch: task has no window length");
  std::vector<int> starts;
  for (int s = 0; s + task.window_len <= task.input.frames; s += stride)
    starts.push_back(s);
  if (starts.empty())
    throw InvalidInputError("eval_batch: sequence shorter than one window");
  return batch_from_starts(task, starts, topo);
}

const std::map<std::string, camera::DistortionParams>& distortion_presets() {
  static const std::map<std::string, camera::DistortionParams> presets = {
      {"d1", {-4.142, 4.956, -0.062, -0.488, -0.712}},
      {"d2", {4.142, -4.956, 0.062, -0.488, -0.712}},
      {"d3", {-2.071, 2.478, -0.031, -0.010, -0.014}},
      {"d4", {2.071, -2.478, 0.031, -0.010, -0.014}},
      {"h36m", {-0.207, 0.248, -0.003, -0.001, -0.001}},
      {"none", {0.0, 0.0, 0.0, 0.0, 0.0}},
  };
  return presets;
}

}  // namespace distlift::taskgen
