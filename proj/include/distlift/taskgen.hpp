#pragma once

#include <map>
#include <string>
#include <vector>

#include "distlift/camera.hpp"
#include "distlift/datagen.hpp"
#include "distlift/lifter.hpp"
#include "distlift/rng.hpp"
#include "distlift/skeleton.hpp"

namespace distlift::taskgen {

// Bounds for the synthetic distortion-parameter distribution: radial
// coefficients are uniform in [-lambda1, lambda1], tangential in
// [-lambda2, lambda2].  n_tasks is the meta-batch size (and the number of
// stratification bins for k1).
struct SamplerConfig {
  double lambda1 = 5.0;
  double lambda2 = 0.5;
  int n_tasks = 5;

  void validate() const;
};

// One meta-learning task: a full 2D trajectory rendered through a single
// distorted camera, the untouched ground-truth 3D sequence, and the camera
// that produced it.  If windowing has been attached, support/query hold
// disjoint window start indices into the sequence.
struct DistortionTask {
  datagen::Trajectory2D input;
  skeleton::Pose3DSequence target;
  camera::DistortionParams params;
  camera::Intrinsics intrinsics;
  int window_len = 0;
  std::vector<int> support_starts;
  std::vector<int> query_starts;
};

enum class SampleMode { uniform, stratified };

// Which 2D source feeds task construction: a stored (jittered) detector
// track, or a clean re-projection of the ground-truth 3D joints.
enum class TaskPath { predicted, gt3d };

// Controls how make_meta_batch crops windows out of the sampled sequences.
struct WindowSamplerConfig {
  int window_len = 9;
  int support_windows = 4;
  int query_windows = 4;
  TaskPath path = TaskPath::predicted;
  std::string track = "detector";  // which stored 2D track the predicted path uses

  void validate() const;
};

// k1, k2, k3 ~ U[-lambda1, lambda1]; p1, p2 ~ U[-lambda2, lambda2],
// drawn in that order.
camera::DistortionParams sample_uniform(const SamplerConfig& cfg,
                                        RngStream& rng);

// k1 = -lambda1 + 2*lambda1*u with u uniform in [(i-1)/N, i/N); bin index i
// is 1-based.  Returns only the k1 value.
double sample_k1_stratified(const SamplerConfig& cfg, int i, RngStream& rng);

// Stratified k1 for bin i, remaining coefficients per sample_uniform.
camera::DistortionParams sample_stratified(const SamplerConfig& cfg, int i,
                                           RngStream& rng);

// Distorts every point of an existing 2D track; the 3D target passes through
// unchanged.
DistortionTask task_from_predicted(const datagen::Trajectory2D& traj,
                                   const skeleton::Pose3DSequence& gt,
                                   const camera::Intrinsics& K,
                                   const camera::DistortionParams& d);

// Projects the ground-truth 3D joints and distorts the clean projection.
// This path never applies detector jitter; the noise config is accepted only
// so both construction paths share a call shape.
DistortionTask task_from_gt3d(const skeleton::Pose3DSequence& gt,
                              const camera::Intrinsics& K,
                              const camera::DistortionParams& d,
                              const datagen::NoiseConfig& noise);

// Samples cfg.n_tasks tasks: per task, one camera (uniform or stratified-k1
// by task index), one sequence drawn uniformly from the dataset, and disjoint
// support/query window start sets.  Deterministic in the rng state; each task
// uses an independent derived stream.
std::vector<DistortionTask> make_meta_batch(const datagen::Dataset& dataset,
                                            const WindowSamplerConfig& ws,
                                            const SamplerConfig& cfg,
                                            SampleMode mode, RngStream& rng);

// Extracts the window starting at `start` as one training sample; the target
// is the root-relative center frame of the window.
lifter::TrainingSample window_sample(const DistortionTask& task, int start,
                                     const skeleton::SkeletonTopology& topo);

lifter::Batch batch_from_starts(const DistortionTask& task,
                                const std::vector<int>& starts,
                                const skeleton::SkeletonTopology& topo);

lifter::Batch support_batch(const DistortionTask& task,
                            const skeleton::SkeletonTopology& topo);
lifter::Batch query_batch(const DistortionTask& task,
                          const skeleton::SkeletonTopology& topo);

// All windows of the task at the given stride, in order, for evaluation.
lifter::Batch eval_batch(const DistortionTask& task,
                         const skeleton::SkeletonTopology& topo, int stride);

// Named fixed cameras: d1-d4 (heavy and mild synthetic pairs), h36m (native
// mild distortion), none (zero coefficients).
const std::map<std::string, camera::DistortionParams>& distortion_presets();

}  // namespace distlift::taskgen
