#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "distlift/errors.hpp"
#include "distlift/lifter.hpp"
#include "distlift/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace distlift;

namespace {

// Independent count of the architecture's parameters: the expand stage is a
// kernel-3 conv from 2J to C channels, each residual block holds a kernel-3
// conv and a pointwise conv (both C to C), and the head maps C features to
// 3J outputs.  R is 0/1/2 blocks for receptive fields 3/9/27.
std::size_t oracle_param_count(int frames, int channels, int joints) {
  const std::size_t C = channels, J = joints;
  const std::size_t R = frames == 3 ? 0 : frames == 9 ? 1 : 2;
  return 9 * J * C + C + R * (4 * C * C + 2 * C) + 3 * J;
}

camera::Intrinsics test_intrinsics() {
  camera::Intrinsics K;
  K.fx = 500.0;
  K.fy = 460.0;
  K.cx = 320.0;
  K.cy = 240.0;
  return K;
}

// Windows whose normalized coordinates are O(1) and random targets of the
// given scale; unit-scale targets keep finite-difference roundoff far below
// the comparison tolerances.
lifter::Batch toy_batch(const lifter::LifterConfig& cfg,
                        const camera::Intrinsics& K, int batch,
                        std::uint64_t seed, double target_scale) {
  RngStream rng(seed);
  lifter::Batch out;
  for (int b = 0; b < batch; ++b) {
    lifter::TrainingSample s;
    s.intrinsics = K;
    s.window.frames = cfg.frames;
    s.window.joints = cfg.joints;
    s.window.points.resize(static_cast<std::size_t>(cfg.frames) * cfg.joints);
    for (auto& p : s.window.points) {
      p.x = K.cx + K.fx * rng.uniform(-1.0, 1.0);
      p.y = K.cy + K.fy * rng.uniform(-1.0, 1.0);
    }
    s.target.root_relative = true;
    s.target.joints.resize(cfg.joints);
    for (auto& j : s.target.joints) {
      j.x = rng.uniform(-target_scale, target_scale);
      j.y = rng.uniform(-target_scale, target_scale);
      j.z = rng.uniform(-target_scale, target_scale);
    }
    out.push_back(std::move(s));
  }
  return out;
}

double batch_loss(const lifter::LifterParams& params,
                  const lifter::Batch& batch) {
  std::vector<skeleton::Pose3D> preds, targets;
  for (const auto& s : batch) {
    preds.push_back(lifter::forward(params, s.window, s.intrinsics));
    targets.push_back(s.target);
  }
  return lifter::mpjpe_loss(preds, targets);
}

std::string temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "distlift_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_SUITE("lifter") {
  TEST_CASE("layout totals match the independent architecture count") {
    for (int frames : {3, 9, 27})
      for (int channels : {8, 16, 64})
        for (int joints : {2, 17}) {
          lifter::LifterConfig cfg;
          cfg.frames = frames;
          cfg.channels = channels;
          cfg.joints = joints;
          auto layout = lifter::LifterLayout::make(cfg);
          std::size_t from_segments = 0;
          for (const auto& s : layout.segments) from_segments += s.size;
          CHECK(layout.total == from_segments);
          CHECK(layout.total == oracle_param_count(frames, channels, joints));
          CHECK(layout.total ==
                lifter::param_count_formula(frames, channels, joints));
        }
  }

  TEST_CASE("full-size configuration lands at the published parameter count") {
    CHECK(lifter::param_count_formula(27, 1024, 17) == 8550451u);
  }

  TEST_CASE("smallest legal network stays under 200 parameters") {
    CHECK(lifter::param_count_formula(3, 8, 2) == 158u);
    lifter::LifterConfig cfg;
    cfg.frames = 3;
    cfg.channels = 8;
    cfg.joints = 2;
    CHECK(lifter::LifterLayout::make(cfg).total <= 200u);
  }

  TEST_CASE("configuration validation") {
    lifter::LifterConfig cfg;
    cfg.frames = 5;
    CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
    cfg.frames = 9;
    cfg.channels = 4;
    CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
    cfg.channels = 8;
    cfg.joints = 1;
    CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
    cfg.joints = 2;
    CHECK_NOTHROW(cfg.validate());
  }

  TEST_CASE("initialization is deterministic, bounded, and zero-biased") {
    lifter::LifterConfig cfg;
    cfg.frames = 9;
    cfg.channels = 16;
    cfg.seed = 11;
    auto a = lifter::init_params(cfg);
    auto b = lifter::init_params(cfg);
    CHECK(a.values == b.values);

    cfg.seed = 12;
    auto c = lifter::init_params(cfg);
    CHECK(a.values != c.values);

    double max_abs = 0.0;
    for (const auto& seg : a.layout.segments) {
      std::size_t fan_in = 1;
      for (std::size_t d = 1; d < seg.shape.size(); ++d)
        fan_in *= static_cast<std::size_t>(seg.shape[d]);
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (std::size_t i = 0; i < seg.size; ++i) {
        const double v = a.values[seg.offset + i];
        if (seg.name.ends_with(".b")) {
          CHECK(v == 0.0);
        } else {
          CHECK(std::abs(v) <= bound);
          max_abs = std::max(max_abs, std::abs(v));
        }
      }
    }
    CHECK(max_abs > 0.0);
  }

  TEST_CASE("forward produces a root-relative pose and reacts to its input") {
    lifter::LifterConfig cfg;
    cfg.frames = 9;
    cfg.channels = 16;
    cfg.seed = 13;
    auto params = lifter::init_params(cfg);
    auto K = test_intrinsics();
    auto batch = toy_batch(cfg, K, 2, 90, 100.0);

    auto pose = lifter::forward(params, batch[0].window, K);
    CHECK(pose.root_relative);
    REQUIRE(pose.joints.size() == 17u);
    auto again = lifter::forward(params, batch[0].window, K);
    for (std::size_t j = 0; j < pose.joints.size(); ++j) {
      CHECK(pose.joints[j].x == again.joints[j].x);
      CHECK(pose.joints[j].z == again.joints[j].z);
    }

    auto other = lifter::forward(params, batch[1].window, K);
    double diff = 0.0;
    for (std::size_t j = 0; j < pose.joints.size(); ++j)
      diff += std::abs(pose.joints[j].x - other.joints[j].x);
    CHECK(diff > 0.0);

    datagen::Trajectory2D bad = batch[0].window;
    bad.frames = 3;
    CHECK_THROWS_AS(lifter::forward(params, bad, K), InvalidInputError);
  }

  TEST_CASE("pixel input equals the explicitly normalized path") {
    lifter::LifterConfig cfg;
    cfg.frames = 3;
    cfg.channels = 8;
    cfg.joints = 2;
    cfg.seed = 14;
    auto params = lifter::init_params(cfg);
    auto K = test_intrinsics();

    RngStream rng(91);
    std::vector<double> norm(2 * cfg.joints * cfg.frames);
    for (auto& v : norm) v = rng.uniform(-0.8, 0.8);

    datagen::Trajectory2D window;
    window.frames = cfg.frames;
    window.joints = cfg.joints;
    window.points.resize(static_cast<std::size_t>(cfg.frames) * cfg.joints);
    for (int t = 0; t < cfg.frames; ++t)
      for (int j = 0; j < cfg.joints; ++j) {
        window.at(t, j).x = K.cx + K.fx * norm[(2 * j + 0) * cfg.frames + t];
        window.at(t, j).y = K.cy + K.fy * norm[(2 * j + 1) * cfg.frames + t];
      }

    auto pose = lifter::forward(params, window, K);
    auto flat = lifter::forward_normalized(params, norm);
    for (int j = 0; j < cfg.joints; ++j) {
      CHECK(testutil::rel_err(pose.joints[j].x, flat[3 * j + 0]) <= 1e-9);
      CHECK(testutil::rel_err(pose.joints[j].y, flat[3 * j + 1]) <= 1e-9);
      CHECK(testutil::rel_err(pose.joints[j].z, flat[3 * j + 2]) <= 1e-9);
    }

    // Shifting a pixel by fx*delta must match shifting the normalized
    // coordinate by delta.
    const double delta = 0.05;
    datagen::Trajectory2D shifted = window;
    shifted.at(1, 0).x += K.fx * delta;
    auto norm_shifted = norm;
    norm_shifted[0 * cfg.frames + 1] += delta;
    auto pose_s = lifter::forward(params, shifted, K);
    auto flat_s = lifter::forward_normalized(params, norm_shifted);
    for (int j = 0; j < cfg.joints; ++j)
      CHECK(testutil::rel_err(pose_s.joints[j].x, flat_s[3 * j + 0]) <= 1e-9);

    std::vector<double> wrong(norm.size() + 1, 0.0);
    CHECK_THROWS_AS(lifter::forward_normalized(params, wrong),
                    InvalidInputError);
  }

  TEST_CASE("batch loss fixtures and double-loop oracle") {
    skeleton::Pose3D a, b;
    a.joints = {{0, 0, 0}};
    b.joints = {{3, 4, 0}};
    CHECK(lifter::mpjpe_loss({a}, {a}) == 0.0);
    CHECK(lifter::mpjpe_loss({a}, {b}) == doctest::Approx(5.0).epsilon(1e-15));

    RngStream rng(92);
    std::vector<skeleton::Pose3D> pred, target;
    for (int i = 0; i < 6; ++i) {
      pred.push_back(testutil::random_pose(rng, 17));
      target.push_back(testutil::random_pose(rng, 17));
    }
    double sum = 0.0;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 17; ++j) {
        const double dx = pred[i].joints[j].x - target[i].joints[j].x;
        const double dy = pred[i].joints[j].y - target[i].joints[j].y;
        const double dz = pred[i].joints[j].z - target[i].joints[j].z;
        sum += std::sqrt(dx * dx + dy * dy + dz * dz);
      }
    const double oracle = sum / (6.0 * 17.0);
    CHECK(testutil::rel_err(lifter::mpjpe_loss(pred, target), oracle) <=
          1e-12);

    CHECK_THROWS_AS(lifter::mpjpe_loss({}, {}), InvalidInputError);
    CHECK_THROWS_AS(lifter::mpjpe_loss({a}, {a, b}), InvalidInputError);
  }

  TEST_CASE("head bias gradient matches its closed form") {
    lifter::LifterConfig cfg;
    cfg.frames = 3;
    cfg.channels = 8;
    cfg.joints = 2;
    cfg.seed = 15;
    auto params = lifter::init_params(cfg);
    auto K = test_intrinsics();
    auto batch = toy_batch(cfg, K, 3, 93, 1.0);

    auto res = lifter::grad(params, batch);
    CHECK(res.loss == doctest::Approx(batch_loss(params, batch)).epsilon(1e-12));

    // dL/d(head.b[o]) averages (pred - target)/distance over the batch, times
    // the mm-per-head-unit output scale.
    const auto& seg = params.layout.segment("head.b");
    const int J = cfg.joints;
    std::vector<double> want(seg.size, 0.0);
    for (const auto& s : batch) {
      auto pose = lifter::forward(params, s.window, s.intrinsics);
      for (int j = 0; j < J; ++j) {
        const double dx = pose.joints[j].x - s.target.joints[j].x;
        const double dy = pose.joints[j].y - s.target.joints[j].y;
        const double dz = pose.joints[j].z - s.target.joints[j].z;
        const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
        const double inv =
            lifter::kOutputScaleMm / (dist * batch.size() * J);
        want[3 * j + 0] += dx * inv;
        want[3 * j + 1] += dy * inv;
        want[3 * j + 2] += dz * inv;
      }
    }
    for (std::size_t i = 0; i < seg.size; ++i)
      CHECK(testutil::rel_err(res.grad[seg.offset + i], want[i]) <= 1e-10);
  }

  TEST_CASE("analytic gradient matches central finite differences") {
    lifter::LifterConfig cfg;
    cfg.frames = 3;
    cfg.channels = 8;
    cfg.joints = 2;
    cfg.seed = 16;
    auto params = lifter::init_params(cfg);
    auto K = test_intrinsics();
    auto batch = toy_batch(cfg, K, 2, 94, 1.0);

    auto analytic = lifter::grad(params, batch);
    const double h = 1e-5;
    int ok = 0;
    for (std::size_t i = 0; i < params.values.size(); ++i) {
      auto probe = params;
      probe.values[i] = params.values[i] + h;
      const double up = batch_loss(probe, batch);
      probe.values[i] = params.values[i] - h;
      const double down = batch_loss(probe, batch);
      const double fd = (up - down) / (2.0 * h);
      if (testutil::rel_err(analytic.grad[i], fd) < 1e-5) ++ok;
    }
    CHECK(ok >= static_cast<int>(0.999 * params.values.size()) + 1);
  }

  TEST_CASE("custom loss heads drive the same backward pass") {
    lifter::LifterConfig cfg;
    cfg.frames = 3;
    cfg.channels = 8;
    cfg.joints = 2;
    cfg.seed = 17;
    auto params = lifter::init_params(cfg);
    auto K = test_intrinsics();
    auto batch = toy_batch(cfg, K, 2, 95, 1.0);
    std::vector<datagen::Trajectory2D> windows{batch[0].window,
                                               batch[1].window};

    auto constant = lifter::grad_custom(
        params, windows, K,
        [](const std::vector<double>&, int windows_n, int outputs,
           std::vector<double>& dpreds) {
          dpreds.assign(static_cast<std::size_t>(windows_n) * outputs, 0.0);
          return 7.5;
        });
    CHECK(constant.loss == 7.5);
    for (double g : constant.grad) CHECK(g == 0.0);

    CHECK_THROWS_AS(
        lifter::grad_custom(params, windows, K,
                            [](const std::vector<double>&, int, int,
                               std::vector<double>& dpreds) {
                              dpreds.clear();
                              return std::numeric_limits<double>::infinity();
                            }),
        NumericError);
    CHECK_THROWS_AS(lifter::grad_custom(params, {}, K,
                                        [](const std::vector<double>&, int,
                                           int, std::vector<double>&) {
                                          return 0.0;
                                        }),
                    InvalidInputError);
  }

  TEST_CASE("zero inner step reduces the meta-gradient to the query gradient") {
    lifter::LifterConfig cfg;
    cfg.frames = 3;
    cfg.channels = 8;
    cfg.joints = 2;
    cfg.seed = 18;
    auto params = lifter::init_params(cfg);
    auto K = test_intrinsics();
    auto support = toy_batch(cfg, K, 2, 96, 1.0);
    auto query = toy_batch(cfg, K, 2, 97, 1.0);

    auto meta = lifter::meta_grad(params, support, query, 0.0);
    auto plain = lifter::grad(params, query);
    REQUIRE(meta.grad.size() == plain.grad.size());
    for (std::size_t i = 0; i < plain.grad.size(); ++i)
      CHECK(std::abs(meta.grad[i] - plain.grad[i]) <= 1e-12);
    CHECK(meta.query_loss == plain.loss);
    CHECK(meta.support_loss == lifter::grad(params, support).loss);
    CHECK_FALSE(meta.first_order);
  }

  TEST_CASE("second-order meta-gradient matches the composed objective") {
    lifter::LifterConfig cfg;
    cfg.frames = 3;
    cfg.channels = 8;
    cfg.joints = 2;
    cfg.seed = 19;
    auto params = lifter::init_params(cfg);
    auto K = test_intrinsics();
    auto support = toy_batch(cfg, K, 3, 98, 1.0);
    auto query = toy_batch(cfg, K, 3, 99, 1.0);
    const double alpha = 0.01;

    auto meta = lifter::meta_grad(params, support, query, alpha);

    auto composed = [&](const lifter::LifterParams& theta) {
      auto gs = lifter::grad(theta, support);
      auto adapted = theta;
      for (std::size_t i = 0; i < adapted.values.size(); ++i)
        adapted.values[i] -= alpha * gs.grad[i];
      return batch_loss(adapted, query);
    };

    const double h = 1e-5;
    int ok = 0;
    for (std::size_t i = 0; i < params.values.size(); ++i) {
      auto probe = params;
      probe.values[i] = params.values[i] + h;
      const double up = composed(probe);
      probe.values[i] = params.values[i] - h;
      const double down = composed(probe);
      const double fd = (up - down) / (2.0 * h);
      if (testutil::rel_err(meta.grad[i], fd) < 1e-4) ++ok;
    }
    CHECK(ok >= static_cast<int>(0.99 * params.values.size()) + 1);

    // The first-order shortcut is a genuinely different vector.
    auto fo_cfg = params;
    fo_cfg.layout.cfg.second_order = false;
    auto first_order = lifter::meta_grad(fo_cfg, support, query, alpha);
    CHECK(first_order.first_order);
    double diff = 0.0;
    for (std::size_t i = 0; i < meta.grad.size(); ++i)
      diff = std::max(diff, std::abs(meta.grad[i] - first_order.grad[i]));
    CHECK(diff > 1e-8);
  }

  TEST_CASE("checkpoints round trip bit-exactly") {
    lifter::LifterConfig cfg;
    cfg.frames = 9;
    cfg.channels = 16;
    cfg.seed = 20;
    auto params = lifter::init_params(cfg);
    const auto path = temp_file("roundtrip.ckpt");

    std::map<std::string, std::vector<double>> extra{
        {"opt.m", {0.125, -3.5, 1e-300}}, {"opt.v", {0.0, 42.0}}};
    std::map<std::string, std::string> meta{{"epoch", "7"},
                                            {"note", "two words"}};
    lifter::save_checkpoint(path, params, extra, meta);
    auto loaded = lifter::load_checkpoint(path);

    CHECK(loaded.params.values == params.values);
    CHECK(loaded.params.layout.cfg.frames == cfg.frames);
    CHECK(loaded.params.layout.cfg.channels == cfg.channels);
    CHECK(loaded.params.layout.cfg.seed == cfg.seed);
    CHECK(loaded.extra == extra);
    CHECK(loaded.meta.at("epoch") == "7");
    CHECK(loaded.meta.at("note") == "two words");
  }

  TEST_CASE("checkpoint loading rejects damaged files") {
    CHECK_THROWS_AS(lifter::load_checkpoint(temp_file("missing.ckpt")),
                    IoError);

    lifter::LifterConfig cfg;
    cfg.frames = 3;
    cfg.channels = 8;
    cfg.joints = 2;
    auto params = lifter::init_params(cfg);
    const auto path = temp_file("damaged.ckpt");
    lifter::save_checkpoint(path, params);

    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    in.close();

    {
      std::ofstream out(path);
      out << text.substr(0, text.size() / 2);
    }
    CHECK_THROWS_AS(lifter::load_checkpoint(path), ParseError);

    {
      std::ofstream out(path);
      std::string bad = text;
      bad.replace(bad.find(" v1"), 3, " v9");
      out << bad;
    }
    try {
      lifter::load_checkpoint(path);
      FAIL("expected a version error");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("v1") != std::string::npos);
    }

    {
      std::ofstream out(path);
      out << "not-a-checkpoint v1\n";
    }
    CHECK_THROWS_AS(lifter::load_checkpoint(path), ParseError);
  }
}
