#include "distlift/datagen.hpp"

#include <cmath>
#include <numbers>

#include "distlift/errors.hpp"
#include "distlift/rng.hpp"

namespace distlift::datagen {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Rest offsets (mm) for the canonical 17-joint layout, child joint -> offset
// from its parent.  y points down (camera convention), so the head is at
// negative y relative to the pelvis.
Vec3 rest_offset(const std::string& joint) {
  if (joint == "rhip") return {-95.0, 0.0, 0.0};
  if (joint == "lhip") return {95.0, 0.0, 0.0};
  if (joint == "rknee" || joint == "lknee") return {0.0, 430.0, 0.0};
  if (joint == "rankle" || joint == "lankle") return {0.0, 425.0, 0.0};
  if (joint == "spine") return {0.0, -220.0, 0.0};
  if (joint == "thorax") return {0.0, -230.0, 0.0};
  if (joint == "neck") return {0.0, -110.0, 0.0};
  if (joint == "head_top") return {0.0, -190.0, 0.0};
  if (joint == "rshoulder") return {-155.0, 0.0, 0.0};
  if (joint == "lshoulder") return {155.0, 0.0, 0.0};
  if (joint == "relbow" || joint == "lelbow") return {0.0, 280.0, 0.0};
  if (joint == "rwrist" || joint == "lwrist") return {0.0, 250.0, 0.0};
  throw InvalidInputError("gen_motion: no rest offset for joint " + joint);
}

struct Oscillator {
  double amp = 0.0, freq = 0.0, phase = 0.0;
  double eval(double t) const { return amp * std::sin(kTwoPi * freq * t + phase); }
};

Oscillator draw_oscillator(RngStream& rng, double amp_lo, double amp_hi,
                           double freq_lo, double freq_hi) {
  Oscillator o;
  o.amp = rng.uniform(amp_lo, amp_hi);
  o.freq = rng.uniform(freq_lo, freq_hi);
  o.phase = rng.uniform(0.0, kTwoPi);
  return o;
}

}  // namespace

MotionSequence gen_motion(const skeleton::SkeletonTopology& topology,
                          int n_frames, std::uint64_t seed,
                          const MotionConfig& config) {
  if (n_frames < 1) throw InvalidInputError("gen_motion: n_frames < 1");
  topology.validate();
  const int J = topology.joint_count();

  for (int attempt = 0; attempt < 10; ++attempt) {
    RngStream rng(mix_seed(seed, 0x6d6f74696f6eULL + attempt));

    const double body_scale = rng.uniform(0.9, 1.1);
    std::vector<Vec3> offsets(J);
    for (int j = 0; j < J; ++j) {
      if (j == topology.root()) continue;
      offsets[j] = rest_offset(topology.joint_names[j]) * body_scale;
    }

    // Per-joint rotation axis and two sinusoidal angle components.
    std::vector<Vec3> axes(J);
    std::vector<Oscillator> angle_a(J), angle_b(J);
    for (int j = 0; j < J; ++j) {
      Vec3 axis{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                rng.uniform(-1.0, 1.0)};
      if (norm(axis) < 1e-6) axis = {0.0, 0.0, 1.0};
      axes[j] = normalized(axis);
      const double amp_hi = j == topology.root() ? 0.12 : 0.35;
      angle_a[j] = draw_oscillator(rng, 0.05, amp_hi, 0.25, 1.2);
      angle_b[j] = draw_oscillator(rng, 0.02, amp_hi * 0.5, 0.25, 0.8);
    }

    const double depth_margin = 600.0;
    const double extra_depth = 500.0 * attempt;
    const Vec3 base{rng.uniform(-350.0, 350.0), rng.uniform(-150.0, 150.0),
                    rng.uniform(config.min_depth_mm + depth_margin,
                                config.max_depth_mm - depth_margin) +
                        extra_depth};
    Oscillator wander[3];
    for (auto& w : wander) w = draw_oscillator(rng, 40.0, 200.0, 0.1, 0.5);

    MotionSequence seq;
    seq.topology = topology;
    seq.intrinsics = config.intrinsics;
    seq.fps = config.fps;
    seq.seed = seed;
    seq.gt3d.frames.resize(n_frames);

    bool valid = true;
    for (int t = 0; t < n_frames && valid; ++t) {
      const double time = t / config.fps;
      skeleton::Pose3D& pose = seq.gt3d.frames[t];
      pose.joints.resize(J);
      pose.root_relative = false;

      std::vector<Mat3> orient(J);
      const int root = topology.root();
      pose.joints[root] = base + Vec3{wander[0].eval(time), wander[1].eval(time),
                                      wander[2].eval(time)};
      orient[root] = axis_angle(
          axes[root], angle_a[root].eval(time) + angle_b[root].eval(time));

      // Parents precede children in the canonical ordering, so one pass works.
      for (const auto& [child, par] : topology.bones) {
        pose.joints[child] = pose.joints[par] + orient[par] * offsets[child];
        orient[child] =
            orient[par] *
            axis_angle(axes[child],
                       angle_a[child].eval(time) + angle_b[child].eval(time));
      }

      for (int j = 0; j < J; ++j)
        if (!(pose.joints[j].z > 0.0)) valid = false;
    }

    if (valid) return seq;
  }
  throw InvalidInputError("gen_motion: could not place subject in front of camera");
}

Trajectory2D project_points(const skeleton::Pose3DSequence& seq,
                            const camera::Intrinsics& K) {
  Trajectory2D out;
  out.frames = seq.frame_count();
  out.joints = seq.joint_count();
  out.points.resize(static_cast<std::size_t>(out.frames) * out.joints);
  for (int t = 0; t < out.frames; ++t)
    for (int j = 0; j < out.joints; ++j)
      out.at(t, j) = camera::project(K, seq.frames[t].joints[j]);
  return out;
}

Trajectory2D project_sequence(const MotionSequence& m) {
  return project_points(m.gt3d, m.intrinsics);
}

Dataset generate_dataset(const skeleton::SkeletonTopology& topology,
                         int n_sequences, int n_frames,
                         const NoiseConfig& noise, std::uint64_t seed) {
  if (n_sequences < 1)
    throw InvalidInputError("generate_dataset: n_sequences < 1");
  Dataset data;
  data.reserve(static_cast<std::size_t>(n_sequences));
  MotionConfig mc;
  for (int i = 0; i < n_sequences; ++i) {
    DatasetRecord rec;
    const std::uint64_t rec_seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    rec.motion = gen_motion(topology, n_frames, rec_seed, mc);
    rec.tracks["clean"] = project_sequence(rec.motion);
    rec.tracks["detector"] =
        simulate_detector(rec.tracks["clean"], noise, rec_seed);
    data.push_back(std::move(rec));
  }
  return data;
}

Trajectory2D simulate_detector(const Trajectory2D& t, const NoiseConfig& noise,
                               std::uint64_t seed) {
  RngStream rng(mix_seed(seed, 0x6465746563746fULL));
  Trajectory2D out = t;
  for (int f = 0; f < t.frames; ++f) {
    for (int j = 0; j < t.joints; ++j) {
      auto& p = out.at(f, j);
      p.x += rng.gaussian(0.0, noise.sigma_px);
      p.y += rng.gaussian(0.0, noise.sigma_px);
      if (rng.uniform() < noise.outlier_prob) {
        const double ang = rng.uniform(0.0, kTwoPi);
        const double rad = rng.uniform(0.0, noise.outlier_max_px);
        p.x += rad * std::cos(ang);
        p.y += rad * std::sin(ang);
      }
    }
  }
  return out;
}

}  // namespace distlift::datagen
