#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xrayqc/augment.hpp"
#include "xrayqc/convert.hpp"
#include "xrayqc/errors.hpp"
#include "xrayqc/model.hpp"
#include "xrayqc/pnm.hpp"
#include "xrayqc/synth.hpp"

// Run configuration shared by every CLI command. Values resolve in
// precedence order: built-in defaults, then the XRAYQC_SEED environment
// variable, then the config file, then command-line flags. The manifest a
// run writes is itself a valid config file that replays the run.

namespace xrayqc {

struct RunConfig {
  std::string command;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  int jobs = 1;

  std::filesystem::path index;
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path params;

  int method = 2;
  bool all_methods = false;
  std::optional<int> g_min;
  std::optional<int> g_max;
  bool full_hist = false;

  std::vector<int> train_batches;  // empty: every batch in the index

  TrainConfig train;
  AugmentParams aug;
  SynthConfig synth;

  RunConfig() {
    aug.target_width = 1000;
    aug.target_height = 2000;
    synth = default_synth_config(0);
  }
};

namespace detail {

inline std::uint64_t cfg_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long r = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("bad value \"" + v + "\" for " + key + " (need an unsigned integer)");
  }
}

inline int cfg_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long r = std::stol(v, &used);
    if (used != v.size() || r < -2147483647L || r > 2147483647L)
      throw std::invalid_argument(v);
    return static_cast<int>(r);
  } catch (const std::exception&) {
    throw ConfigError("bad value \"" + v + "\" for " + key + " (need an integer)");
  }
}

inline double cfg_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double r = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("bad value \"" + v + "\" for " + key + " (need a number)");
  }
}

inline bool cfg_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("bad value \"" + v + "\" for " + key + " (need 0/1/true/false)");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    std::size_t comma = v.find(',', pos);
    if (comma == std::string::npos) comma = v.size();
    out.push_back(v.substr(pos, comma - pos));
    pos = comma + 1;
  }
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

inline std::vector<int> cfg_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const std::string& item : split_list(v)) out.push_back(cfg_int(key, item));
  return out;
}

inline std::vector<double> cfg_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const std::string& item : split_list(v)) out.push_back(cfg_double(key, item));
  return out;
}

}  // namespace detail

// Applies one key=value pair. Unknown keys are usage errors.
inline void apply_kv(RunConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "command") {
    c.command = value;
  } else if (key == "seed") {
    c.seed = cfg_u64(key, value);
  } else if (key == "out") {
    c.out = value;
  } else if (key == "jobs") {
    c.jobs = cfg_int(key, value);
  } else if (key == "index") {
    c.index = value;
  } else if (key == "in") {
    c.inputs.clear();
    for (const std::string& p : split_list(value)) c.inputs.emplace_back(p);
  } else if (key == "params") {
    c.params = value;
  } else if (key == "method") {
    c.method = cfg_int(key, value);
  } else if (key == "all_methods") {
    c.all_methods = cfg_bool(key, value);
  } else if (key == "g_min") {
    c.g_min = cfg_int(key, value);
  } else if (key == "g_max") {
    c.g_max = cfg_int(key, value);
  } else if (key == "full_hist") {
    c.full_hist = cfg_bool(key, value);
  } else if (key == "train_batches") {
    c.train_batches = cfg_int_list(key, value);
  } else if (key == "epochs") {
    c.train.epochs = cfg_int(key, value);
  } else if (key == "lr0") {
    c.train.lr0 = cfg_double(key, value);
  } else if (key == "decay_period") {
    c.train.decay_period = cfg_int(key, value);
  } else if (key == "decay_factor") {
    c.train.decay_factor = cfg_double(key, value);
  } else if (key == "minibatch") {
    c.train.minibatch_size = cfg_int(key, value);
  } else if (key == "flip_h_prob") {
    c.aug.flip_h_prob = cfg_double(key, value);
  } else if (key == "flip_v_prob") {
    c.aug.flip_v_prob = cfg_double(key, value);
  } else if (key == "target_width") {
    c.aug.target_width = cfg_int(key, value);
  } else if (key == "target_height") {
    c.aug.target_height = cfg_int(key, value);
  } else if (key == "batch_sizes") {
    c.synth.batch_sizes = cfg_int_list(key, value);
  } else if (key == "abnormal_fractions") {
    c.synth.abnormal_fractions = cfg_double_list(key, value);
  } else if (key == "image_width") {
    c.synth.image_width = cfg_int(key, value);
  } else if (key == "image_height") {
    c.synth.image_height = cfg_int(key, value);
  } else if (key == "coating_base") {
    c.synth.coating_base = cfg_double(key, value);
  } else if (key == "coating_means") {
    c.synth.coating_means = cfg_double_list(key, value);
  } else if (key == "coating_spread") {
    c.synth.coating_spread = cfg_double(key, value);
  } else if (key == "noise_sigma") {
    c.synth.noise_sigma = cfg_double(key, value);
  } else if (key == "background_mean") {
    c.synth.background_mean = cfg_double(key, value);
  } else if (key == "severity_threshold") {
    c.synth.severity_threshold = cfg_double(key, value);
  } else if (key == "anomaly_mix") {
    c.synth.anomaly_mix = cfg_double_list(key, value);
  } else if (key == "abn_sev_min") {
    c.synth.abn_sev_min = cfg_double(key, value);
  } else if (key == "abn_sev_max") {
    c.synth.abn_sev_max = cfg_double(key, value);
  } else if (key == "normal_sev_min") {
    c.synth.normal_sev_min = cfg_double(key, value);
  } else if (key == "normal_sev_max") {
    c.synth.normal_sev_max = cfg_double(key, value);
  } else if (key == "normal_minor_prob") {
    c.synth.normal_minor_prob = cfg_double(key, value);
  } else {
    throw ConfigError("unknown config key \"" + key + "\"");
  }
}

// Flat key=value file, one pair per line, # starts a comment.
inline std::vector<std::pair<std::string, std::string>> parse_config_file(
    const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = detail::read_file_bytes(path);
  const std::string text(bytes.begin(), bytes.end());

  std::vector<std::pair<std::string, std::string>> kvs;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto is_space = [](char ch) { return ch == ' ' || ch == '\t' || ch == '\r'; };
    std::size_t b = 0, e = line.size();
    while (b < e && is_space(line[b])) ++b;
    while (e > b && is_space(line[e - 1])) --e;
    line = line.substr(b, e - b);
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + " has no '='");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    while (!key.empty() && is_space(key.back())) key.pop_back();
    std::size_t vb = 0;
    while (vb < value.size() && is_space(value[vb])) ++vb;
    value = value.substr(vb);
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) +
                                       " has an empty key");
    kvs.emplace_back(std::move(key), std::move(value));
  }
  return kvs;
}

namespace detail {

inline void require_exists(const std::filesystem::path& p, const std::string& what) {
  if (p.empty()) throw ConfigError(what + " is required but not set");
  if (!std::filesystem::exists(p)) throw ConfigError(what + " \"" + p.string() + "\" does not exist");
}

}  // namespace detail

inline GlobalBounds bounds_from_config(const RunConfig& c) {
  if (!c.g_min || !c.g_max) throw ConfigError("need both g_min and g_max");
  if (*c.g_min < 0 || *c.g_max > 65535 || *c.g_min >= *c.g_max)
    throw ConfigError("g_min/g_max must satisfy 0 <= g_min < g_max <= 65535");
  GlobalBounds b{static_cast<std::uint16_t>(*c.g_min), static_cast<std::uint16_t>(*c.g_max)};
  try {
    check_valid(b);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return b;
}

// Final cross-field validation; fills the derived seeds.
inline void validate_run_config(RunConfig& c) {
  static const char* commands[] = {"synth", "stats", "bounds", "convert",
                                   "train", "predict", "crossval"};
  bool known = false;
  for (const char* cmd : commands) known = known || c.command == cmd;
  if (c.command.empty()) throw ConfigError("no command given");
  if (!known) throw ConfigError("unknown command \"" + c.command + "\"");

  if (c.out.empty()) throw ConfigError("out is required");
  if (c.jobs < 1) throw ConfigError("jobs must be at least 1");
  if (c.method < 1 || c.method > 4) throw ConfigError("method must be 1..4");
  if (c.g_min.has_value() != c.g_max.has_value())
    throw ConfigError("g_min and g_max must be given together");
  if (c.g_min) bounds_from_config(c);

  c.synth.seed = c.seed;
  c.train.seed = c.seed;

  if (c.command == "synth") {
    try {
      check_valid(c.synth);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  } else if (c.command == "stats") {
    if (c.inputs.empty()) throw ConfigError("stats needs at least one input (in=...)");
    for (const auto& p : c.inputs) detail::require_exists(p, "input");
  } else if (c.command == "bounds") {
    if (c.inputs.empty() && c.index.empty())
      throw ConfigError("bounds needs inputs (in=...) or an index");
    for (const auto& p : c.inputs) detail::require_exists(p, "input");
    if (c.inputs.empty()) detail::require_exists(c.index, "index");
  } else if (c.command == "convert") {
    if (c.inputs.empty()) throw ConfigError("convert needs at least one input (in=...)");
    for (const auto& p : c.inputs) detail::require_exists(p, "input");
  } else if (c.command == "train" || c.command == "crossval") {
    detail::require_exists(c.index, "index");
    try {
      check_valid(c.train);
      check_valid(c.aug);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  } else if (c.command == "predict") {
    detail::require_exists(c.params, "params");
    if (c.inputs.empty() && c.index.empty())
      throw ConfigError("predict needs inputs (in=...) or an index");
    for (const auto& p : c.inputs) detail::require_exists(p, "input");
    if (c.inputs.empty()) detail::require_exists(c.index, "index");
    try {
      check_valid(c.aug);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
}

// ---- manifest ------------------------------------------------------------

namespace detail {

inline std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

inline std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  char buf[40];
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    std::snprintf(buf, sizeof buf, "%.17g", v[i]);
    out += buf;
  }
  return out;
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string abs_path(const std::filesystem::path& p) {
  std::error_code ec;
  const std::filesystem::path a = std::filesystem::weakly_canonical(p, ec);
  return ec ? std::filesystem::absolute(p).string() : a.string();
}

}  // namespace detail

// The resolved configuration as a config file. No timestamps or hostnames:
// replaying it must reproduce the run byte for byte.
inline std::string render_manifest(const RunConfig& c) {
  using namespace detail;
  std::string out = "# resolved run configuration; pass back via --config to replay\n";
  const auto kv = [&out](const std::string& k, const std::string& v) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  };
  kv("command", c.command);
  kv("seed", std::to_string(c.seed));
  kv("out", abs_path(c.out));
  kv("jobs", std::to_string(c.jobs));
  if (!c.index.empty()) kv("index", abs_path(c.index));
  if (!c.inputs.empty()) {
    std::string joined;
    for (std::size_t i = 0; i < c.inputs.size(); ++i) {
      if (i) joined += ',';
      joined += abs_path(c.inputs[i]);
    }
    kv("in", joined);
  }
  if (!c.params.empty()) kv("params", abs_path(c.params));
  kv("method", std::to_string(c.method));
  kv("all_methods", c.all_methods ? "1" : "0");
  if (c.g_min) kv("g_min", std::to_string(*c.g_min));
  if (c.g_max) kv("g_max", std::to_string(*c.g_max));
  kv("full_hist", c.full_hist ? "1" : "0");
  if (!c.train_batches.empty()) kv("train_batches", join_ints(c.train_batches));
  kv("epochs", std::to_string(c.train.epochs));
  kv("lr0", fmt_double(c.train.lr0));
  kv("decay_period", std::to_string(c.train.decay_period));
  kv("decay_factor", fmt_double(c.train.decay_factor));
  kv("minibatch", std::to_string(c.train.minibatch_size));
  kv("flip_h_prob", fmt_double(c.aug.flip_h_prob));
  kv("flip_v_prob", fmt_double(c.aug.flip_v_prob));
  kv("target_width", std::to_string(c.aug.target_width));
  kv("target_height", std::to_string(c.aug.target_height));
  kv("batch_sizes", join_ints(c.synth.batch_sizes));
  kv("abnormal_fractions", join_doubles(c.synth.abnormal_fractions));
  kv("image_width", std::to_string(c.synth.image_width));
  kv("image_height", std::to_string(c.synth.image_height));
  kv("coating_base", fmt_double(c.synth.coating_base));
  if (!c.synth.coating_means.empty()) kv("coating_means", join_doubles(c.synth.coating_means));
  kv("coating_spread", fmt_double(c.synth.coating_spread));
  kv("noise_sigma", fmt_double(c.synth.noise_sigma));
  kv("background_mean", fmt_double(c.synth.background_mean));
  kv("severity_threshold", fmt_double(c.synth.severity_threshold));
  kv("anomaly_mix", join_doubles(c.synth.anomaly_mix));
  kv("abn_sev_min", fmt_double(c.synth.abn_sev_min));
  kv("abn_sev_max", fmt_double(c.synth.abn_sev_max));
  kv("normal_sev_min", fmt_double(c.synth.normal_sev_min));
  kv("normal_sev_max", fmt_double(c.synth.normal_sev_max));
  kv("normal_minor_prob", fmt_double(c.synth.normal_minor_prob));
  return out;
}

inline void write_manifest(const RunConfig& c, const std::filesystem::path& path) {
  const std::string text = render_manifest(c);
  detail::write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace xrayqc
