#include "distlift/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "distlift/errors.hpp"
#include "distlift/hash.hpp"
#include "distlift/taskgen.hpp"

namespace distlift::config {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// One mutable binding per key; setters parse and assign, getters re-serialize
// for the canonical dump.
struct Binding {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

struct Schema {
  // section -> key -> binding, in stable insertion order for dumping
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, Binding>>>> sections;

  Binding* find(const std::string& section, const std::string& key) {
    for (auto& [name, keys] : sections) {
      if (name != section) continue;
      for (auto& [k, b] : keys)
        if (k == key) return &b;
      return nullptr;
    }
    return nullptr;
  }

  bool has_section(const std::string& section) const {
    for (const auto& [name, keys] : sections)
      if (name == section) return true;
    return false;
  }
};

double parse_double(const std::string& v) {
  std::size_t pos = 0;
  const double x = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument(v);
  return x;
}

long long parse_int(const std::string& v) {
  std::size_t pos = 0;
  const long long x = std::stoll(v, &pos);
  if (pos != v.size()) throw std::invalid_argument(v);
  return x;
}

std::uint64_t parse_u64(const std::string& v) {
  std::size_t pos = 0;
  const unsigned long long x = std::stoull(v, &pos);
  if (pos != v.size()) throw std::invalid_argument(v);
  return x;
}

bool parse_bool(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw std::invalid_argument(v);
}

Binding bind_double(double& ref) {
  return {[&ref](const std::string& v) { ref = parse_double(v); },
          [&ref] { return fmt(ref); }};
}

Binding bind_int(int& ref) {
  return {[&ref](const std::string& v) { ref = static_cast<int>(parse_int(v)); },
          [&ref] { return std::to_string(ref); }};
}

Binding bind_u64(std::uint64_t& ref) {
  return {[&ref](const std::string& v) { ref = parse_u64(v); },
          [&ref] { return std::to_string(ref); }};
}

Binding bind_bool(bool& ref) {
  return {[&ref](const std::string& v) { ref = parse_bool(v); },
          [&ref] { return ref ? "true" : "false"; }};
}

Binding bind_string(std::string& ref) {
  return {[&ref](const std::string& v) { ref = v; }, [&ref] { return ref; }};
}

Binding bind_string_list(std::vector<std::string>& ref) {
  return {[&ref](const std::string& v) {
            ref.clear();
            std::stringstream ss(v);
            std::string item;
            while (std::getline(ss, item, ',')) {
              item = trim(item);
              if (!item.empty()) ref.push_back(item);
            }
          },
          [&ref] {
            std::string out;
            for (std::size_t i = 0; i < ref.size(); ++i)
              out += (i ? "," : "") + ref[i];
            return out;
          }};
}

Binding bind_path(taskgen::TaskPath& ref) {
  return {[&ref](const std::string& v) {
            if (v == "predicted")
              ref = taskgen::TaskPath::predicted;
            else if (v == "gt3d")
              ref = taskgen::TaskPath::gt3d;
            else
              throw std::invalid_argument(v);
          },
          [&ref] {
            return std::string(ref == taskgen::TaskPath::predicted ? "predicted"
                                                                   : "gt3d");
          }};
}

Schema make_schema(Config& c) {
  Schema s;
  s.sections.push_back({"data",
                        {{"sequences", bind_int(c.data.sequences)},
                         {"frames", bind_int(c.data.frames)},
                         {"seed", bind_u64(c.data.seed)},
                         {"sigma_px", bind_double(c.data.sigma_px)},
                         {"outlier_prob", bind_double(c.data.outlier_prob)},
                         {"outlier_max_px", bind_double(c.data.outlier_max_px)}}});
  s.sections.push_back({"lifter",
                        {{"frames", bind_int(c.lifter.frames)},
                         {"channels", bind_int(c.lifter.channels)},
                         {"joints", bind_int(c.lifter.joints)},
                         {"seed", bind_u64(c.lifter.seed)},
                         {"second_order", bind_bool(c.lifter.second_order)}}});
  s.sections.push_back(
      {"train",
       {{"alpha", bind_double(c.train.alpha)},
        {"beta", bind_double(c.train.beta)},
        {"meta_batch", bind_int(c.train.meta_batch)},
        {"batch_size", bind_int(c.train.batch_size)},
        {"epochs", bind_int(c.train.epochs)},
        {"lr_decay", bind_double(c.train.lr_decay)},
        {"lambda1", bind_double(c.train.lambda1)},
        {"lambda2", bind_double(c.train.lambda2)},
        {"seed", bind_u64(c.train.seed)},
        {"steps_per_epoch", bind_int(c.train.steps_per_epoch)},
        {"support_windows", bind_int(c.train.support_windows)},
        {"query_windows", bind_int(c.train.query_windows)},
        {"path", bind_path(c.train.path)},
        {"track", bind_string(c.train.track)},
        {"outer_plain_sgd", bind_bool(c.train.outer_plain_sgd)},
        {"reuse_inner_tasks", bind_bool(c.train.reuse_inner_tasks)},
        {"inner_uniform_sampling", bind_bool(c.train.inner_uniform_sampling)}}});
  s.sections.push_back(
      {"adapt",
       {{"lr", bind_double(c.adapt.lr)},
        {"epochs", bind_int(c.adapt.epochs)},
        {"scenario", bind_int(c.adapt.scenario)},
        {"symmetry_weight", bind_double(c.adapt.symmetry_weight)},
        {"consistency_weight", bind_double(c.adapt.consistency_weight)}}});
  s.sections.push_back({"eval",
                        {{"preset", bind_string(c.eval.preset)},
                         {"track", bind_string(c.eval.track)},
                         {"stride", bind_int(c.eval.stride)},
                         {"pckh_ratio", bind_double(c.eval.pckh_ratio)}}});
  s.sections.push_back(
      {"experiment",
       {{"name", bind_string(c.experiment.name)},
        {"presets", bind_string_list(c.experiment.presets)},
        {"degradation_min_ratio", bind_double(c.experiment.degradation_min_ratio)},
        {"dynamics_min_improvement",
         bind_double(c.experiment.dynamics_min_improvement)},
        {"scenario2_lr", bind_double(c.experiment.scenario2_lr)},
        {"scenario1_windows", bind_int(c.experiment.scenario1_windows)},
        {"eval_seed", bind_u64(c.experiment.eval_seed)},
        {"eval_sequences", bind_int(c.experiment.eval_sequences)}}});
  return s;
}

}  // namespace

void DataConfig::validate() const {
  if (sequences < 1) throw ConfigError("data.sequences must be >= 1");
  if (frames < 3) throw ConfigError("data.frames must be >= 3");
  if (sigma_px < 0.0 || outlier_prob < 0.0 || outlier_prob > 1.0 ||
      outlier_max_px < 0.0)
    throw ConfigError("data: noise parameters out of range");
}

void EvalConfig::validate() const {
  if (!taskgen::distortion_presets().count(preset))
    throw ConfigError("eval.preset: unknown preset '" + preset + "'");
  if (stride < 0) throw ConfigError("eval.stride must be >= 0");
  if (!(pckh_ratio > 0.0)) throw ConfigError("eval.pckh_ratio must be > 0");
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("experiment.name must not be empty");
  if (presets.empty()) throw ConfigError("experiment.presets must not be empty");
  for (const auto& p : presets)
    if (!taskgen::distortion_presets().count(p))
      throw ConfigError("experiment.presets: unknown preset '" + p + "'");
  if (!(degradation_min_ratio > 0.0) || !(dynamics_min_improvement >= 0.0))
    throw ConfigError("experiment: thresholds out of range");
  if (!(scenario2_lr > 0.0)) throw ConfigError("experiment.scenario2_lr must be > 0");
  if (scenario1_windows < 1)
    throw ConfigError("experiment.scenario1_windows must be >= 1");
  if (eval_sequences < 1)
    throw ConfigError("experiment.eval_sequences must be >= 1");
}

void Config::validate() const {
  data.validate();
  eval.validate();
  experiment.validate();
  try {
    lifter.validate();
    train.validate();
    adapt.validate();
  } catch (const InvalidInputError& e) {
    throw ConfigError(e.what());
  }
}

Config parse_config_text(const std::string& text, const std::string& origin) {
  Config cfg;
  Schema schema = make_schema(cfg);

  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!schema.has_section(section))
        fail("unknown section '" + section + "'");
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) fail("key '" + key + "' outside any section");
    Binding* binding = schema.find(section, key);
    if (!binding) fail("unknown key '" + section + "." + key + "'");
    try {
      binding->set(value);
    } catch (const std::exception&) {
      fail("bad value '" + value + "' for " + section + "." + key);
    }
  }

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

Config load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string canonical_text(const Config& cfg) {
  Config copy = cfg;
  Schema schema = make_schema(copy);
  std::string out;
  for (const auto& [section, keys] : schema.sections) {
    out += "[" + section + "]\n";
    for (const auto& [key, binding] : keys)
      out += key + " = " + binding.get() + "\n";
  }
  return out;
}

std::string config_fingerprint(const Config& cfg) {
  return fnv1a_hex(canonical_text(cfg));
}

}  // namespace distlift::config
