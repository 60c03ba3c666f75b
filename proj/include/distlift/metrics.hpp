#pragma once

#include <string>
#include <vector>

#include "distlift/geometry.hpp"
#include "distlift/skeleton.hpp"

namespace distlift::metrics {

struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation;  // proper orthogonal
  Vec3 translation;
};

// Mean over joints (and frames, for the sequence overload) of the per-joint
// Euclidean distance in millimeters.
double mpjpe(const skeleton::Pose3D& pred, const skeleton::Pose3D& gt);
double mpjpe(const skeleton::Pose3DSequence& pred,
             const skeleton::Pose3DSequence& gt);

struct ProcrustesResult {
  SimilarityTransform transform;
  skeleton::Pose3D aligned;  // transform applied to pred
};

// Least-squares similarity alignment of pred onto gt: minimizes
// sum_j || s*R*pred_j + t - gt_j ||^2 over scale, rotation, translation.
// Throws DegenerateGeometryError when gt spans less than a plane or pred
// has zero spread.
ProcrustesResult procrustes_align(const skeleton::Pose3D& pred,
                                  const skeleton::Pose3D& gt);

// Per-frame Procrustes alignment followed by mpjpe, averaged over frames.
double p_mpjpe(const skeleton::Pose3D& pred, const skeleton::Pose3D& gt);
double p_mpjpe(const skeleton::Pose3DSequence& pred,
               const skeleton::Pose3DSequence& gt);

// Percentage of joints whose prediction lands strictly within
// ratio * (per-frame ground-truth head-segment length) of the ground truth.
// A distance exactly at the threshold counts as incorrect.
double pckh(const skeleton::Pose3D& pred, const skeleton::Pose3D& gt,
            const skeleton::SkeletonTopology& topo, double ratio = 0.5);
double pckh(const skeleton::Pose3DSequence& pred,
            const skeleton::Pose3DSequence& gt,
            const skeleton::SkeletonTopology& topo, double ratio = 0.5);

struct MetricRow {
  std::string preset;
  std::string scenario;
  std::string metric;
  double value = 0.0;
};

// One row per (distortion preset, scenario, metric).
struct MetricReport {
  std::vector<MetricRow> rows;

  void add(const std::string& preset, const std::string& scenario,
           const std::string& metric, double value) {
    rows.push_back({preset, scenario, metric, value});
  }
};

void write_metric_csv(const std::string& path, const MetricReport& report);
MetricReport load_metric_csv(const std::string& path);

}  // namespace distlift::metrics
