#pragma once

#include <functional>
#include <vector>

#include "distlift/camera.hpp"
#include "distlift/datagen.hpp"
#include "distlift/lifter.hpp"
#include "distlift/skeleton.hpp"

namespace distlift::adaptation {

struct AdaptConfig {
  double lr = 0.6;
  int epochs = 100;
  int scenario = 1;
  // The bone-length objective is their plain sum; the weights exist only as
  // an exposed knob and default to 1.
  double symmetry_weight = 1.0;
  double consistency_weight = 1.0;

  void validate() const;
};

// Sum over frames and mirror pairs of |left bone length - right bone length|.
double symmetry_loss(const skeleton::Pose3DSequence& pred,
                     const skeleton::SkeletonTopology& topo);

// Sum over consecutive frames and bones of the absolute bone-length change.
// Requires at least two frames.
double consistency_loss(const skeleton::Pose3DSequence& pred,
                        const skeleton::SkeletonTopology& topo);

// symmetry_weight * symmetry + consistency_weight * consistency.
double iso_loss(const skeleton::Pose3DSequence& pred,
                const skeleton::SkeletonTopology& topo,
                double symmetry_weight = 1.0, double consistency_weight = 1.0);

// Called with the parameters as of the start of each epoch (0-based) and the
// final parameters at epoch == epochs; lets callers record held-out curves.
using EpochObserver =
    std::function<void(int epoch, const lifter::LifterParams& params)>;

struct AdaptResult {
  lifter::LifterParams params;
  // Objective value at the start of every epoch plus the final value:
  // epochs+1 entries (fewer when the divergence guard fires).
  std::vector<double> curve;
  bool diverged = false;
};

// Supervised fine-tuning on a small labeled batch from the target
// environment: full-batch SGD on the MPJPE loss.
AdaptResult finetune_scenario1(const lifter::LifterParams& params,
                               const lifter::Batch& labeled,
                               const AdaptConfig& cfg,
                               const EpochObserver& observer = nullptr);

// Label-free test-time optimization: full-batch SGD on the bone-length
// objective over stride-1 windows of the given 2D trajectories.  Consistency
// pairs never cross a trajectory boundary.  No 3D data enters this path.
AdaptResult iso_scenario2(const lifter::LifterParams& params,
                          const std::vector<datagen::Trajectory2D>& trajectories,
                          const camera::Intrinsics& K,
                          const skeleton::SkeletonTopology& topo,
                          const AdaptConfig& cfg,
                          const EpochObserver& observer = nullptr);

}  // namespace distlift::adaptation
