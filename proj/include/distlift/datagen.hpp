#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "distlift/camera.hpp"
#include "distlift/skeleton.hpp"

namespace distlift::datagen {

struct Trajectory2D {
  int frames = 0;
  int joints = 0;
  std::vector<camera::PixelPoint> points;  // row-major [frame][joint]

  camera::PixelPoint& at(int t, int j) { return points[t * joints + j]; }
  const camera::PixelPoint& at(int t, int j) const { return points[t * joints + j]; }
};

struct MotionConfig {
  double fps = 50.0;
  double min_depth_mm = 2000.0;
  double max_depth_mm = 5000.0;
  camera::Intrinsics intrinsics;
};

// One synthetic capture: rigid-bone ground truth in camera coordinates.
struct MotionSequence {
  skeleton::Pose3DSequence gt3d;  // camera space, mm, z > 0
  skeleton::SkeletonTopology topology;
  camera::Intrinsics intrinsics;
  double fps = 50.0;
  std::uint64_t seed = 0;
};

struct NoiseConfig {
  double sigma_px = 2.0;
  double outlier_prob = 0.01;
  double outlier_max_px = 30.0;
};

// Deterministic in seed.  Joint angles follow sums of low-frequency
// sinusoids with seeded phases; the pelvis wanders smoothly at 2-5 m depth;
// bone lengths are fixed per sequence within anthropometric ranges.
MotionSequence gen_motion(const skeleton::SkeletonTopology& topology,
                          int n_frames, std::uint64_t seed,
                          const MotionConfig& config);

// Pinhole projection of every joint of every frame (no distortion).
Trajectory2D project_points(const skeleton::Pose3DSequence& seq,
                            const camera::Intrinsics& K);
Trajectory2D project_sequence(const MotionSequence& m);

// Zero-mean Gaussian pixel jitter plus sporadic bounded outliers; the
// simulated stand-in for a 2D keypoint detector.  Deterministic in seed.
Trajectory2D simulate_detector(const Trajectory2D& t, const NoiseConfig& noise,
                               std::uint64_t seed);

// A stored sequence plus its named 2D tracks (e.g. "clean", "detector").
struct DatasetRecord {
  MotionSequence motion;
  std::map<std::string, Trajectory2D> tracks;
};

using Dataset = std::vector<DatasetRecord>;

// n_sequences motions with "clean" (pinhole projection) and "detector"
// (jittered) tracks; record i is fully determined by (seed, i).
Dataset generate_dataset(const skeleton::SkeletonTopology& topology,
                         int n_sequences, int n_frames,
                         const NoiseConfig& noise, std::uint64_t seed);

void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

}  // namespace distlift::datagen
