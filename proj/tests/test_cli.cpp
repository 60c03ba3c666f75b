#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "distlift/camera.hpp"
#include "distlift/cli.hpp"
#include "distlift/datagen.hpp"
#include "distlift/lifter.hpp"
#include "distlift/metrics.hpp"
#include "distlift/taskgen.hpp"
#include "doctest.h"

using namespace distlift;

namespace {

namespace fs = std::filesystem;

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "distlift");
  std::vector<char*> argv;
  argv.reserve(args.size());
  for (auto& a : args) argv.push_back(a.data());
  return cli::cli_main(static_cast<int>(argv.size()), argv.data());
}

fs::path work_dir() {
  auto dir = fs::temp_directory_path() / "distlift_tests" / "cli";
  fs::create_directories(dir);
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  const auto path = (work_dir() / name).string();
  std::ofstream out(path);
  out << text;
  return path;
}

std::string tiny_config() {
  return write_file("tiny.cfg",
                    "[data]\n"
                    "sequences = 2\n"
                    "frames = 30\n"
                    "seed = 21\n"
                    "[lifter]\n"
                    "frames = 3\n"
                    "channels = 8\n"
                    "[train]\n"
                    "epochs = 1\n"
                    "steps_per_epoch = 1\n"
                    "meta_batch = 2\n"
                    "batch_size = 4\n"
                    "support_windows = 2\n"
                    "query_windows = 2\n"
                    "[adapt]\n"
                    "epochs = 2\n"
                    "[experiment]\n"
                    "presets = d3\n"
                    "eval_sequences = 1\n"
                    "scenario1_windows = 4\n");
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "cannot open ", path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage and parse failures exit with code 1") {
    CHECK(run_cli({}) == 1);
    CHECK(run_cli({"no-such-command"}) == 1);
    CHECK(run_cli({"distort"}) == 1);  // --in is required
    CHECK(run_cli({"gen-data", "--config", "/nonexistent.cfg"}) == 1);
    CHECK(run_cli({"--help"}) == 0);
    CHECK(run_cli({"gen-data", "--help"}) == 0);
  }

  TEST_CASE("dataset generation is deterministic and seed-sensitive") {
    const auto cfg = tiny_config();
    const auto a = (work_dir() / "gen_a.ds").string();
    const auto b = (work_dir() / "gen_b.ds").string();
    const auto c = (work_dir() / "gen_c.ds").string();

    CHECK(run_cli({"gen-data", "--config", cfg, "--out", a}) == 0);
    CHECK(run_cli({"gen-data", "--config", cfg, "--out", b}) == 0);
    CHECK(read_bytes(a) == read_bytes(b));

    auto data = datagen::load_dataset(a);
    CHECK(data.size() == 2u);
    CHECK(data.front().motion.gt3d.frame_count() == 30);
    CHECK(data.front().motion.seed != 0u);

    // The --seed flag wins over the config file's seed.
    CHECK(run_cli({"gen-data", "--config", cfg, "--out", c, "--seed", "99"}) ==
          0);
    CHECK(read_bytes(a) != read_bytes(c));
  }

  TEST_CASE("the default output location honors the environment") {
    const auto cfg = tiny_config();
    const auto dir = (work_dir() / "env_out").string();
    fs::remove_all(dir);
    setenv("DISTLIFT_OUT_DIR", dir.c_str(), 1);
    CHECK(run_cli({"gen-data", "--config", cfg}) == 0);
    unsetenv("DISTLIFT_OUT_DIR");
    CHECK(fs::exists(dir + "/dataset.ds"));
  }

  TEST_CASE("distortion matches the camera model point by point") {
    const auto cfg = tiny_config();
    const auto src = (work_dir() / "dist_src.ds").string();
    const auto dst = (work_dir() / "dist_dst.ds").string();
    REQUIRE(run_cli({"gen-data", "--config", cfg, "--out", src}) == 0);

    CHECK(run_cli({"distort", "--in", src, "--preset", "d2", "--out", dst,
                   "--track-out", "warped"}) == 0);
    auto orig = datagen::load_dataset(src);
    auto warped = datagen::load_dataset(dst);
    const auto& d2 = taskgen::distortion_presets().at("d2");
    for (std::size_t r = 0; r < orig.size(); ++r) {
      const auto& in_track = orig[r].tracks.at("detector");
      const auto& out_track = warped[r].tracks.at("warped");
      for (std::size_t i = 0; i < in_track.points.size(); ++i) {
        auto want = camera::distort_pixel(orig[r].motion.intrinsics, d2,
                                          in_track.points[i]);
        CHECK(out_track.points[i].x == want.x);
        CHECK(out_track.points[i].y == want.y);
      }
    }

    // Explicit coefficients instead of a preset.
    CHECK(run_cli({"distort", "--in", src, "--params", "0,0,0,0,0", "--out",
                   dst}) == 0);
    auto identity = datagen::load_dataset(dst);
    const auto& same = identity.front().tracks.at("distorted");
    const auto& was = orig.front().tracks.at("detector");
    CHECK(same.points[5].x ==
          doctest::Approx(was.points[5].x).epsilon(1e-12));
    CHECK(same.points[5].y ==
          doctest::Approx(was.points[5].y).epsilon(1e-12));

    CHECK(run_cli({"distort", "--in", src, "--preset", "bogus", "--out",
                   dst}) == 2);
    CHECK(run_cli({"distort", "--in", src, "--out", dst}) == 1);
    CHECK(run_cli({"distort", "--in", src, "--preset", "d1", "--params",
                   "1,2,3,4,5", "--out", dst}) == 1);

    const auto garbage = write_file("garbage.ds", "not a dataset\n");
    CHECK(run_cli({"distort", "--in", garbage, "--preset", "d1", "--out",
                   dst}) == 2);
  }

  TEST_CASE("training, adaptation and evaluation round trip on disk") {
    const auto cfg = tiny_config();
    const auto data = (work_dir() / "pipe.ds").string();
    const auto run = (work_dir() / "pipe_run").string();
    fs::remove_all(run);
    REQUIRE(run_cli({"gen-data", "--config", cfg, "--out", data}) == 0);

    CHECK(run_cli({"pretrain", "--config", cfg, "--data", data, "--out",
                   run}) == 0);
    CHECK(fs::exists(run + "/pretrain.ckpt"));
    CHECK(fs::exists(run + "/train_pretrain.csv"));

    CHECK(run_cli({"meta-train", "--config", cfg, "--data", data, "--init",
                   run + "/pretrain.ckpt", "--out", run}) == 0);
    CHECK(fs::exists(run + "/meta.ckpt"));

    CHECK(run_cli({"meta-train", "--config", cfg, "--data", data, "--init",
                   run + "/pretrain.ckpt", "--resume",
                   run + "/meta_epoch_1.ckpt"}) == 1);

    CHECK(run_cli({"adapt", "--config", cfg, "--ckpt", run + "/meta.ckpt",
                   "--data", data, "--scenario", "1", "--preset", "d3",
                   "--out", run + "/adapt1"}) == 0);
    CHECK(fs::exists(run + "/adapt1/adapted.ckpt"));
    CHECK(fs::exists(run + "/adapt1/adapt_curve.csv"));

    CHECK(run_cli({"adapt", "--config", cfg, "--ckpt", run + "/meta.ckpt",
                   "--data", data, "--scenario", "2", "--preset", "d3",
                   "--out", run + "/adapt2"}) == 0);
    CHECK(run_cli({"adapt", "--config", cfg, "--ckpt", run + "/meta.ckpt",
                   "--data", data, "--scenario", "3"}) == 1);

    CHECK(run_cli({"eval", "--config", cfg, "--ckpt",
                   run + "/adapt1/adapted.ckpt", "--data", data, "--preset",
                   "d3", "--out", run + "/eval"}) == 0);
    auto report = metrics::load_metric_csv(run + "/eval/eval.csv");
    CHECK(report.rows.size() == 3u);

    CHECK(run_cli({"report", run + "/eval/eval.csv", run + "/eval/eval.csv",
                   "--out", run + "/merged"}) == 0);
    auto merged = metrics::load_metric_csv(run + "/merged/merged.csv");
    CHECK(merged.rows.size() == 6u);
    CHECK(fs::exists(run + "/merged/report.svg"));
  }

  TEST_CASE("experiment specs dispatch on their name") {
    const auto spec = write_file("exp_degradation.cfg",
                                 "[experiment]\n"
                                 "name = degradation\n"
                                 "presets = d3\n"
                                 "eval_sequences = 1\n"
                                 "scenario1_windows = 4\n"
                                 "[data]\n"
                                 "sequences = 2\n"
                                 "frames = 30\n"
                                 "[lifter]\n"
                                 "frames = 3\n"
                                 "channels = 8\n"
                                 "[train]\n"
                                 "epochs = 1\n"
                                 "steps_per_epoch = 1\n"
                                 "meta_batch = 2\n"
                                 "batch_size = 4\n"
                                 "support_windows = 2\n"
                                 "query_windows = 2\n"
                                 "[adapt]\n"
                                 "epochs = 1\n");
    const auto out = (work_dir() / "exp_run").string();
    fs::remove_all(out);
    CHECK(run_cli({"exp", "run", spec, "--out", out}) == 0);
    CHECK(fs::exists(out + "/trend.csv"));
    CHECK(fs::exists(out + "/spec.cfg"));

    const auto bad = write_file("exp_bogus.cfg",
                                "[experiment]\nname = bogus\n");
    CHECK(run_cli({"exp", "run", bad, "--out", out}) == 2);
    CHECK(run_cli({"exp", "run"}) == 1);
  }
}
