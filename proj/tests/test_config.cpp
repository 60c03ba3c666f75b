#include <filesystem>
#include <fstream>

#include "distlift/config.hpp"
#include "distlift/errors.hpp"
#include "doctest.h"

using namespace distlift;

namespace {

std::string temp_config(const std::string& name, const std::string& text) {
  auto dir = std::filesystem::temp_directory_path() / "distlift_tests";
  std::filesystem::create_directories(dir);
  const auto path = (dir / name).string();
  std::ofstream out(path);
  out << text;
  return path;
}

void expect_error(const std::string& text, const std::string& fragment) {
  try {
    config::parse_config_text(text, "test.cfg");
    FAIL("expected a config error for: ", text);
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK_MESSAGE(what.find(fragment) != std::string::npos,
                  "missing '", fragment, "' in: ", what);
  }
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("empty input yields the documented defaults") {
    auto cfg = config::parse_config_text("", "empty.cfg");
    CHECK(cfg.data.sequences == 8);
    CHECK(cfg.data.frames == 120);
    CHECK(cfg.data.sigma_px == 2.0);
    CHECK(cfg.lifter.frames == 9);
    CHECK(cfg.train.alpha == 0.1);
    CHECK(cfg.train.beta == 0.001);
    CHECK(cfg.train.meta_batch == 5);
    CHECK(cfg.train.lr_decay == 0.95);
    CHECK(cfg.adapt.lr == 0.6);
    CHECK(cfg.adapt.epochs == 100);
    CHECK(cfg.eval.preset == "none");
    CHECK(cfg.eval.pckh_ratio == 0.5);
    CHECK(cfg.experiment.degradation_min_ratio == 1.5);
    CHECK(cfg.experiment.dynamics_min_improvement == 0.10);
    CHECK(cfg.experiment.presets ==
          std::vector<std::string>{"d1", "d2", "d3", "d4"});
  }

  TEST_CASE("a single override leaves everything else untouched") {
    auto cfg = config::parse_config_text("[train]\nalpha = 0.25\n", "one.cfg");
    CHECK(cfg.train.alpha == 0.25);
    CHECK(cfg.train.beta == 0.001);
    CHECK(cfg.data.sequences == 8);
  }

  TEST_CASE("sections, comments, lists and booleans parse") {
    const std::string text =
        "# full example\n"
        "[data]\n"
        "sequences = 3   # inline comment\n"
        "seed = 42\n"
        "\n"
        "[train]\n"
        "outer_plain_sgd = true\n"
        "epochs = 2\n"
        "[experiment]\n"
        "presets = d1, h36m ,none\n"
        "eval_seed = 123456789012345\n";
    auto cfg = config::parse_config_text(text, "full.cfg");
    CHECK(cfg.data.sequences == 3);
    CHECK(cfg.data.seed == 42u);
    CHECK(cfg.train.outer_plain_sgd);
    CHECK(cfg.train.epochs == 2);
    CHECK(cfg.experiment.presets ==
          std::vector<std::string>{"d1", "h36m", "none"});
    CHECK(cfg.experiment.eval_seed == 123456789012345u);
  }

  TEST_CASE("errors carry the origin and line number") {
    expect_error("[nosuch]\n", "test.cfg:1");
    expect_error("[nosuch]\n", "unknown section");
    expect_error("[train]\nnosuchkey = 1\n", "test.cfg:2");
    expect_error("[train]\nnosuchkey = 1\n", "unknown key 'train.nosuchkey'");
    expect_error("[train]\nalpha = abc\n", "test.cfg:2");
    expect_error("alpha = 1\n", "outside any section");
    expect_error("[train\n", "unterminated");
    expect_error("[train]\njust some words\n", "test.cfg:2");
    expect_error("[train]\nouter_plain_sgd = yes\n", "test.cfg:2");
  }

  TEST_CASE("violated invariants are reported as config errors") {
    expect_error("[train]\nbeta = -1\n", "beta");
    expect_error("[data]\nsequences = 0\n", "sequences");
    expect_error("[eval]\npreset = bogus\n", "unknown preset");
    expect_error("[experiment]\npresets = d1, bogus\n", "unknown preset");
    expect_error("[experiment]\nscenario1_windows = 0\n", "scenario1_windows");
  }

  TEST_CASE("the canonical dump round trips exactly") {
    const std::string text =
        "[data]\nsequences = 5\nsigma_px = 1.5\n"
        "[lifter]\nframes = 3\nchannels = 32\n"
        "[train]\nalpha = 0.07\nreuse_inner_tasks = true\n"
        "[experiment]\npresets = d2,d3\n";
    auto cfg = config::parse_config_text(text, "src.cfg");
    const auto canon = config::canonical_text(cfg);
    auto reparsed = config::parse_config_text(canon, "canon.cfg");
    CHECK(config::canonical_text(reparsed) == canon);
    CHECK(config::config_fingerprint(reparsed) ==
          config::config_fingerprint(cfg));
    CHECK(reparsed.data.sequences == 5);
    CHECK(reparsed.lifter.channels == 32);
    CHECK(reparsed.train.reuse_inner_tasks);
    CHECK(reparsed.experiment.presets == std::vector<std::string>{"d2", "d3"});
  }

  TEST_CASE("fingerprints react to any value change") {
    auto base = config::parse_config_text("", "a.cfg");
    auto other = base;
    other.train.alpha = 0.100000001;
    CHECK(config::config_fingerprint(base) !=
          config::config_fingerprint(other));
    other = base;
    other.experiment.presets.push_back("h36m");
    CHECK(config::config_fingerprint(base) !=
          config::config_fingerprint(other));
  }

  TEST_CASE("files load like inline text") {
    const auto path = temp_config("load.cfg", "[adapt]\nlr = 0.3\nepochs = 7\n");
    auto cfg = config::load_config_file(path);
    CHECK(cfg.adapt.lr == 0.3);
    CHECK(cfg.adapt.epochs == 7);
    CHECK_THROWS_AS(config::load_config_file(path + ".absent"), IoError);
  }
}
