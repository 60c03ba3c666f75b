#include "distlift/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "distlift/errors.hpp"

namespace distlift::metrics {

namespace {

void check_shapes(const skeleton::Pose3D& pred, const skeleton::Pose3D& gt) {
  if (pred.joints.size() != gt.joints.size() || pred.joints.empty())
    throw InvalidInputError("metrics: joint count mismatch or empty pose");
}

void check_shapes(const skeleton::Pose3DSequence& pred,
                  const skeleton::Pose3DSequence& gt) {
  if (pred.frame_count() != gt.frame_count() || pred.frames.empty())
    throw InvalidInputError("metrics: frame count mismatch or empty sequence");
}

}  // namespace

double mpjpe(const skeleton::Pose3D& pred, const skeleton::Pose3D& gt) {
  check_shapes(pred, gt);
  double sum = 0.0;
  for (std::size_t j = 0; j < pred.joints.size(); ++j)
    sum += norm(pred.joints[j] - gt.joints[j]);
  return sum / static_cast<double>(pred.joints.size());
}

double mpjpe(const skeleton::Pose3DSequence& pred,
             const skeleton::Pose3DSequence& gt) {
  check_shapes(pred, gt);
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.frames.size(); ++t)
    sum += mpjpe(pred.frames[t], gt.frames[t]);
  return sum / static_cast<double>(pred.frames.size());
}

ProcrustesResult procrustes_align(const skeleton::Pose3D& pred,
                                  const skeleton::Pose3D& gt) {
  check_shapes(pred, gt);
  const int n = static_cast<int>(pred.joints.size());
  if (n < 3) throw InvalidInputError("procrustes_align: need >= 3 joints");

  Eigen::Matrix3Xd P(3, n), G(3, n);
  for (int j = 0; j < n; ++j) {
    P.col(j) << pred.joints[j].x, pred.joints[j].y, pred.joints[j].z;
    G.col(j) << gt.joints[j].x, gt.joints[j].y, gt.joints[j].z;
  }
  const Eigen::Vector3d mp = P.rowwise().mean();
  const Eigen::Vector3d mg = G.rowwise().mean();
  P.colwise() -= mp;
  G.colwise() -= mg;

  const double var_p = P.squaredNorm() / n;
  if (!(var_p > 0.0))
    throw DegenerateGeometryError("procrustes_align: pred has zero spread");

  const Eigen::Matrix3d cov = G * P.transpose() / n;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv(1) > 1e-12 * std::max(sv(0), 1.0)))
    throw DegenerateGeometryError(
        "procrustes_align: ground truth spans less than a plane");

  Eigen::Vector3d sign = Eigen::Vector3d::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0)
    sign(2) = -1.0;  // flip the smallest singular direction
  const Eigen::Matrix3d R =
      svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
  const double scale = sv.dot(sign) / var_p;
  const Eigen::Vector3d t = mg - scale * R * mp;

  ProcrustesResult out;
  out.transform.scale = scale;
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < 3; ++r) out.transform.rotation.m[c * 3 + r] = R(r, c);
  out.transform.translation = {t(0), t(1), t(2)};

  out.aligned.root_relative = pred.root_relative;
  out.aligned.joints.resize(pred.joints.size());
  for (int j = 0; j < n; ++j) {
    const Eigen::Vector3d a =
        scale * R * Eigen::Vector3d(pred.joints[j].x, pred.joints[j].y,
                                    pred.joints[j].z) +
        t;
    out.aligned.joints[j] = {a(0), a(1), a(2)};
  }
  return out;
}

double p_mpjpe(const skeleton::Pose3D& pred, const skeleton::Pose3D& gt) {
  return mpjpe(procrustes_align(pred, gt).aligned, gt);
}

double p_mpjpe(const skeleton::Pose3DSequence& pred,
               const skeleton::Pose3DSequence& gt) {
  check_shapes(pred, gt);
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.frames.size(); ++t)
    sum += p_mpjpe(pred.frames[t], gt.frames[t]);
  return sum / static_cast<double>(pred.frames.size());
}

double pckh(const skeleton::Pose3D& pred, const skeleton::Pose3D& gt,
            const skeleton::SkeletonTopology& topo, double ratio) {
  check_shapes(pred, gt);
  if (static_cast<int>(gt.joints.size()) != topo.joint_count())
    throw InvalidInputError("pckh: pose does not match topology");
  const double head_len =
      norm(gt.joints[topo.head_top_joint] - gt.joints[topo.neck_joint]);
  if (!(head_len > 0.0))
    throw DegenerateGeometryError("pckh: zero head-segment length");
  const double threshold = ratio * head_len;
  int hits = 0;
  for (std::size_t j = 0; j < pred.joints.size(); ++j)
    if (norm(pred.joints[j] - gt.joints[j]) < threshold) ++hits;
  return 100.0 * hits / static_cast<double>(pred.joints.size());
}

double pckh(const skeleton::Pose3DSequence& pred,
            const skeleton::Pose3DSequence& gt,
            const skeleton::SkeletonTopology& topo, double ratio) {
  check_shapes(pred, gt);
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.frames.size(); ++t)
    sum += pckh(pred.frames[t], gt.frames[t], topo, ratio);
  return sum / static_cast<double>(pred.frames.size());
}

void write_metric_csv(const std::string& path, const MetricReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "preset,scenario,metric,value\n";
  char buf[40];
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof buf, "%.17g", row.value);
    out << row.preset << ',' << row.scenario << ',' << row.metric << ','
        << buf << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

MetricReport load_metric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "preset,scenario,metric,value")
    throw ParseError(path + ": not a metric csv");
  MetricReport report;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    MetricRow row;
    std::string value;
    if (!std::getline(ss, row.preset, ',') ||
        !std::getline(ss, row.scenario, ',') ||
        !std::getline(ss, row.metric, ',') || !std::getline(ss, value))
      throw ParseError(path + ":" + std::to_string(lineno) + ": bad row");
    try {
      std::size_t pos = 0;
      row.value = std::stod(value, &pos);
      if (pos != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": bad value '" + value + "'");
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace distlift::metrics
