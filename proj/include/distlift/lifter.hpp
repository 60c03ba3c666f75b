#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "distlift/camera.hpp"
#include "distlift/datagen.hpp"
#include "distlift/skeleton.hpp"

namespace distlift::lifter {

// The linear head works in meters so its weights stay on the same scale as
// the normalized 2D inputs; every pose that leaves the network is in mm.
constexpr double kOutputScaleMm = 1000.0;

struct LifterConfig {
  int frames = 9;     // receptive field; one of 3, 9, 27
  int channels = 64;  // hidden width, >= 8
  int joints = 17;
  std::uint64_t seed = 0;
  bool second_order = true;  // differentiate through the inner update exactly

  void validate() const;
};

struct SegmentInfo {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Fixed parameter layout derived from the config: an expand convolution
// (kernel 3), then residual blocks at dilation 3 and 9 as the receptive
// field requires, then a linear head on the single remaining position.
struct LifterLayout {
  LifterConfig cfg;
  int res_blocks = 0;  // 0 / 1 / 2 for frames 3 / 9 / 27
  std::vector<SegmentInfo> segments;
  std::size_t total = 0;

  static LifterLayout make(const LifterConfig& cfg);
  const SegmentInfo& segment(const std::string& name) const;
};

std::size_t param_count_formula(int frames, int channels, int joints);

struct LifterParams {
  LifterLayout layout;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

// Fan-in-scaled uniform weights, zero biases, deterministic in cfg.seed.
LifterParams init_params(const LifterConfig& cfg);

// One training example: a window of cfg.frames jittered/distorted 2D frames
// plus the root-relative center-frame 3D target (mm).
struct TrainingSample {
  datagen::Trajectory2D window;
  skeleton::Pose3D target;
  camera::Intrinsics intrinsics;
};

using Batch = std::vector<TrainingSample>;

// Root-relative center-frame 3D pose for one window.  Pixels are normalized
// with K before entering the network.
skeleton::Pose3D forward(const LifterParams& params,
                         const datagen::Trajectory2D& window,
                         const camera::Intrinsics& K);

// Same network on an explicitly normalized input (2J*frames values, laid
// out [joint-x, joint-y interleaved][frame]); exposed so the normalization
// pre-step is independently checkable.
std::vector<double> forward_normalized(const LifterParams& params,
                                       const std::vector<double>& norm_window);

// Mean over batch and joints of the per-joint Euclidean distance (mm).
double mpjpe_loss(const std::vector<skeleton::Pose3D>& pred,
                  const std::vector<skeleton::Pose3D>& target);

struct GradResult {
  double loss = 0.0;
  std::vector<double> grad;
};

// Reverse-mode gradient of the batch MPJPE loss.  Throws NumericError when
// the loss is non-finite.
GradResult grad(const LifterParams& params, const Batch& batch);

// Reverse-mode gradient of a caller-supplied loss of the batch predictions.
// `head` receives the predictions ([window][3J] row-major, root-relative mm)
// and must fill the same-shaped d(loss)/d(pred) buffer.  Used by the
// adaptation losses; first-order only.
using LossHead = std::function<double(const std::vector<double>& preds,
                                      int windows, int outputs,
                                      std::vector<double>& dpreds)>;
GradResult grad_custom(const LifterParams& params,
                       const std::vector<datagen::Trajectory2D>& windows,
                       const camera::Intrinsics& K, const LossHead& head);

struct MetaGradResult {
  double support_loss = 0.0;      // loss at the incoming parameters on support
  double query_loss = 0.0;        // loss of the adapted parameters on query
  std::vector<double> grad;
  bool first_order = false;
};

// Gradient of query_loss(params - alpha * grad(support)) with respect to
// params.  With cfg.second_order the inner update is differentiated exactly
// (Hessian-vector product via forward-over-reverse); otherwise the plain
// query gradient at the adapted parameters is returned and flagged.
MetaGradResult meta_grad(const LifterParams& params, const Batch& support,
                         const Batch& query, double alpha);

// Versioned text checkpoint: named segments of raw 64-bit values (hex),
// bit-exact round trip.  `extra` carries optimizer/loop state arrays and
// `meta` free-form key/value lines (epoch, rng state, ...).
struct Checkpoint {
  LifterParams params;
  std::map<std::string, std::vector<double>> extra;
  std::map<std::string, std::string> meta;
};

void save_checkpoint(const std::string& path, const LifterParams& params,
                     const std::map<std::string, std::vector<double>>& extra = {},
                     const std::map<std::string, std::string>& meta = {});
Checkpoint load_checkpoint(const std::string& path);

}  // namespace distlift::lifter
