#include "distlift/adaptation.hpp"

#include <cmath>
#include <limits>

#include "distlift/errors.hpp"

namespace distlift::adaptation {

void AdaptConfig::validate() const {
  if (!(lr > 0.0)) throw InvalidInputError("adapt config: lr must be > 0");
  if (epochs < 0) throw InvalidInputError("adapt config: epochs < 0");
  if (scenario != 1 && scenario != 2)
    throw InvalidInputError("adapt config: scenario must be 1 or 2");
  if (symmetry_weight < 0.0 || consistency_weight < 0.0)
    throw InvalidInputError("adapt config: negative loss weight");
}

double symmetry_loss(const skeleton::Pose3DSequence& pred,
                     const skeleton::SkeletonTopology& topo) {
  const auto lengths = skeleton::bone_lengths(pred, topo);
  double sum = 0.0;
  for (int t = 0; t < lengths.frames; ++t)
    for (const auto& [left, right] : topo.mirror_pairs)
      sum += std::fabs(lengths.at(t, left) - lengths.at(t, right));
  return sum;
}

double consistency_loss(const skeleton::Pose3DSequence& pred,
                        const skeleton::SkeletonTopology& topo) {
  if (pred.frame_count() < 2)
    throw InvalidInputError("consistency_loss: need at least two frames");
  const auto lengths = skeleton::bone_lengths(pred, topo);
  double sum = 0.0;
  for (int t = 0; t + 1 < lengths.frames; ++t)
    for (int b = 0; b < lengths.bones; ++b)
      sum += std::fabs(lengths.at(t + 1, b) - lengths.at(t, b));
  return sum;
}

double iso_loss(const skeleton::Pose3DSequence& pred,
                const skeleton::SkeletonTopology& topo, double symmetry_weight,
                double consistency_weight) {
  return symmetry_weight * symmetry_loss(pred, topo) +
         consistency_weight * consistency_loss(pred, topo);
}

namespace {

// Generic guarded full-batch SGD: step() returns the objective at the current
// parameters and fills the gradient.  Keeps the best-objective parameters and
// returns them if any step produces a non-finite value.
AdaptResult sgd_loop(
    const lifter::LifterParams& init, const AdaptConfig& cfg,
    const std::function<double(const lifter::LifterParams&, std::vector<double>&)>& step,
    const EpochObserver& observer) {
  cfg.validate();
  AdaptResult result;
  result.params = init;
  lifter::LifterParams best = init;
  double best_loss = std::numeric_limits<double>::infinity();

  std::vector<double> grad;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (observer) observer(epoch, result.params);
    double loss;
    try {
      loss = step(result.params, grad);
    } catch (const NumericError&) {
      result.params = best;
      result.diverged = true;
      return result;
    }
    result.curve.push_back(loss);
    if (loss < best_loss) {
      best_loss = loss;
      best = result.params;
    }
    for (std::size_t i = 0; i < result.params.values.size(); ++i)
      result.params.values[i] -= cfg.lr * grad[i];
  }

  double final_loss;
  try {
    std::vector<double> unused;
    final_loss = step(result.params, unused);
  } catch (const NumericError&) {
    result.params = best;
    result.diverged = true;
    return result;
  }
  result.curve.push_back(final_loss);
  if (observer) observer(cfg.epochs, result.params);
  return result;
}

}  // namespace

AdaptResult finetune_scenario1(const lifter::LifterParams& params,
                               const lifter::Batch& labeled,
                               const AdaptConfig& cfg,
                               const EpochObserver& observer) {
  if (labeled.empty())
    throw InvalidInputError("finetune_scenario1: empty labeled batch");
  return sgd_loop(
      params, cfg,
      [&](const lifter::LifterParams& p, std::vector<double>& g) {
        auto r = lifter::grad(p, labeled);
        g = std::move(r.grad);
        return r.loss;
      },
      observer);
}

AdaptResult iso_scenario2(const lifter::LifterParams& params,
                          const std::vector<datagen::Trajectory2D>& trajectories,
                          const camera::Intrinsics& K,
                          const skeleton::SkeletonTopology& topo,
                          const AdaptConfig& cfg,
                          const EpochObserver& observer) {
  const int L = params.layout.cfg.frames;
  const int J = params.layout.cfg.joints;
  if (topo.joint_count() != J)
    throw InvalidInputError("iso_scenario2: topology does not match lifter");

  // Stride-1 windows per trajectory so consecutive predictions are
  // consecutive center frames; record each trajectory's window range.
  std::vector<datagen::Trajectory2D> windows;
  std::vector<std::pair<int, int>> ranges;
  for (const auto& traj : trajectories) {
    if (traj.joints != J)
      throw InvalidInputError("iso_scenario2: trajectory joint mismatch");
    const int begin = static_cast<int>(windows.size());
    for (int s = 0; s + L <= traj.frames; ++s) {
      datagen::Trajectory2D w;
      w.frames = L;
      w.joints = J;
      w.points.assign(traj.points.begin() + static_cast<std::size_t>(s) * J,
                      traj.points.begin() + static_cast<std::size_t>(s + L) * J);
      windows.push_back(std::move(w));
    }
    ranges.emplace_back(begin, static_cast<int>(windows.size()));
  }
  if (windows.empty())
    throw InvalidInputError("iso_scenario2: no full-length windows");

  const double ws = cfg.symmetry_weight;
  const double wc = cfg.consistency_weight;
  const auto& bones = topo.bones;
  const auto& pairs = topo.mirror_pairs;

  lifter::LossHead head = [&, ws, wc](const std::vector<double>& preds,
                                      int n_windows, int outputs,
                                      std::vector<double>& dpreds) {
    const int B = static_cast<int>(bones.size());
    std::vector<double> len(static_cast<std::size_t>(n_windows) * B);
    std::vector<Vec3> dir(static_cast<std::size_t>(n_windows) * B);
    for (int w = 0; w < n_windows; ++w) {
      const double* p = preds.data() + static_cast<std::size_t>(w) * outputs;
      for (int b = 0; b < B; ++b) {
        const auto [child, parent] = bones[b];
        const Vec3 d{p[3 * child + 0] - p[3 * parent + 0],
                     p[3 * child + 1] - p[3 * parent + 1],
                     p[3 * child + 2] - p[3 * parent + 2]};
        const double l = norm(d);
        len[static_cast<std::size_t>(w) * B + b] = l;
        dir[static_cast<std::size_t>(w) * B + b] =
            l > 0.0 ? d * (1.0 / l) : Vec3{};  // subgradient 0 at zero length
      }
    }

    double loss = 0.0;
    std::vector<double> dlen(len.size(), 0.0);
    for (int w = 0; w < n_windows; ++w) {
      for (const auto& [left, right] : pairs) {
        const double diff = len[static_cast<std::size_t>(w) * B + left] -
                            len[static_cast<std::size_t>(w) * B + right];
        loss += ws * std::fabs(diff);
        const double s = diff > 0.0 ? ws : diff < 0.0 ? -ws : 0.0;
        dlen[static_cast<std::size_t>(w) * B + left] += s;
        dlen[static_cast<std::size_t>(w) * B + right] -= s;
      }
    }
    for (const auto& [begin, end] : ranges) {
      for (int w = begin; w + 1 < end; ++w) {
        for (int b = 0; b < B; ++b) {
          const double diff = len[static_cast<std::size_t>(w + 1) * B + b] -
                              len[static_cast<std::size_t>(w) * B + b];
          loss += wc * std::fabs(diff);
          const double s = diff > 0.0 ? wc : diff < 0.0 ? -wc : 0.0;
          dlen[static_cast<std::size_t>(w + 1) * B + b] += s;
          dlen[static_cast<std::size_t>(w) * B + b] -= s;
        }
      }
    }

    dpreds.assign(preds.size(), 0.0);
    for (int w = 0; w < n_windows; ++w) {
      double* dp = dpreds.data() + static_cast<std::size_t>(w) * outputs;
      for (int b = 0; b < B; ++b) {
        const double dl = dlen[static_cast<std::size_t>(w) * B + b];
        if (dl == 0.0) continue;
        const auto [child, parent] = bones[b];
        const Vec3 g = dir[static_cast<std::size_t>(w) * B + b] * dl;
        dp[3 * child + 0] += g.x;
        dp[3 * child + 1] += g.y;
        dp[3 * child + 2] += g.z;
        dp[3 * parent + 0] -= g.x;
        dp[3 * parent + 1] -= g.y;
        dp[3 * parent + 2] -= g.z;
      }
    }
    return loss;
  };

  return sgd_loop(
      params, cfg,
      [&](const lifter::LifterParams& p, std::vector<double>& g) {
        auto r = lifter::grad_custom(p, windows, K, head);
        g = std::move(r.grad);
        return r.loss;
      },
      observer);
}

}  // namespace distlift::adaptation
