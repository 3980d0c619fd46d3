#pragma once

// Run configuration: JSON config files, CLI override merge, the effective
// config echo embedded in manifests, and the output directory layout.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "poislearn/io.hpp"
#include "poislearn/nets.hpp"
#include "poislearn/systems.hpp"
#include "poislearn/train.hpp"

namespace poislearn {

// Maps to exit code 2; numerical failures map to 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  TrainConfig train;
  std::string out_dir = "out";
  bool plots = false;
  std::string checkpoint;             // evaluate: path of a trained checkpoint
  std::string metric = "traj_error";  // classify: report cell to compare
};

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "system",     "flavor",        "seed",          "dt",
      "steps",      "trajectories",  "gt_trajectories", "hidden",
      "lr",         "epochs",        "batch_size",    "jacobi_weight",
      "unroll_iters", "val_fraction", "out",          "plots",
      "checkpoint", "metric"};
  return keys;
}

namespace detail {

inline double cfg_num(const njson& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config key " + key + " must be a number");
  return v.get<double>();
}

inline int cfg_int(const njson& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError("config key " + key + " must be an integer");
  return v.get<int>();
}

inline std::uint64_t cfg_u64(const njson& v, const std::string& key) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
    throw ConfigError("config key " + key + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline std::string cfg_str(const njson& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key " + key + " must be a string");
  return v.get<std::string>();
}

inline bool cfg_bool(const njson& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("config key " + key + " must be a boolean");
  return v.get<bool>();
}

}  // namespace detail

inline void apply_config_json(RunConfig& cfg, const njson& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  const auto& keys = config_keys();
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError("unknown config key: " + key);
    }
  }
  try {
    if (j.contains("system")) cfg.train.system = parse_system(detail::cfg_str(j["system"], "system"));
    if (j.contains("flavor")) cfg.train.flavor = parse_flavor(detail::cfg_str(j["flavor"], "flavor"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (j.contains("seed")) cfg.train.seed = detail::cfg_u64(j["seed"], "seed");
  if (j.contains("dt")) cfg.train.dt = detail::cfg_num(j["dt"], "dt");
  if (j.contains("steps")) cfg.train.steps = detail::cfg_int(j["steps"], "steps");
  if (j.contains("trajectories")) cfg.train.n_train_traj = detail::cfg_int(j["trajectories"], "trajectories");
  if (j.contains("gt_trajectories")) cfg.train.n_gt_traj = detail::cfg_int(j["gt_trajectories"], "gt_trajectories");
  if (j.contains("hidden")) cfg.train.hidden = detail::cfg_int(j["hidden"], "hidden");
  if (j.contains("lr")) cfg.train.lr = detail::cfg_num(j["lr"], "lr");
  if (j.contains("epochs")) cfg.train.epochs = detail::cfg_int(j["epochs"], "epochs");
  if (j.contains("batch_size")) cfg.train.batch_size = detail::cfg_int(j["batch_size"], "batch_size");
  if (j.contains("jacobi_weight")) cfg.train.jacobi_weight = detail::cfg_num(j["jacobi_weight"], "jacobi_weight");
  if (j.contains("unroll_iters")) cfg.train.unroll_iters = detail::cfg_int(j["unroll_iters"], "unroll_iters");
  if (j.contains("val_fraction")) cfg.train.val_fraction = detail::cfg_num(j["val_fraction"], "val_fraction");
  if (j.contains("out")) cfg.out_dir = detail::cfg_str(j["out"], "out");
  if (j.contains("plots")) cfg.plots = detail::cfg_bool(j["plots"], "plots");
  if (j.contains("checkpoint")) cfg.checkpoint = detail::cfg_str(j["checkpoint"], "checkpoint");
  if (j.contains("metric")) cfg.metric = detail::cfg_str(j["metric"], "metric");
}

inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  njson j = njson::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
  apply_config_json(cfg, j);
}

// Single line, fixed key order; parsing this echo back through
// apply_config_json reproduces the same config.
inline std::string effective_config_json(const RunConfig& cfg) {
  std::string s = "{";
  s += "\"system\":\"" + std::string(system_name(cfg.train.system)) + "\"";
  s += ",\"flavor\":\"" + std::string(flavor_name(cfg.train.flavor)) + "\"";
  s += ",\"seed\":" + std::to_string(cfg.train.seed);
  s += ",\"dt\":" + fmt17(cfg.train.dt);
  s += ",\"steps\":" + std::to_string(cfg.train.steps);
  s += ",\"trajectories\":" + std::to_string(cfg.train.n_train_traj);
  s += ",\"gt_trajectories\":" + std::to_string(cfg.train.n_gt_traj);
  s += ",\"hidden\":" + std::to_string(cfg.train.hidden);
  s += ",\"lr\":" + fmt17(cfg.train.lr);
  s += ",\"epochs\":" + std::to_string(cfg.train.epochs);
  s += ",\"batch_size\":" + std::to_string(cfg.train.batch_size);
  s += ",\"jacobi_weight\":" + fmt17(cfg.train.jacobi_weight);
  s += ",\"unroll_iters\":" + std::to_string(cfg.train.unroll_iters);
  s += ",\"val_fraction\":" + fmt17(cfg.train.val_fraction);
  s += ",\"out\":\"" + cfg.out_dir + "\"";
  s += std::string(",\"plots\":") + (cfg.plots ? "true" : "false");
  s += ",\"checkpoint\":\"" + cfg.checkpoint + "\"";
  s += ",\"metric\":\"" + cfg.metric + "\"";
  return s + "}";
}

inline std::filesystem::path run_dir(const RunConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) / system_name(cfg.train.system) /
         flavor_name(cfg.train.flavor) / std::to_string(cfg.train.seed);
}

// Config echo plus a sha256 per artifact, enough to verify an exact rerun.
inline std::string manifest_json(const std::string& command, const RunConfig& cfg,
                                 const std::vector<std::pair<std::string, std::string>>& file_hashes) {
  std::string s = "{\n";
  s += "  \"command\": \"" + command + "\",\n";
  s += "  \"config\": " + effective_config_json(cfg) + ",\n";
  s += "  \"artifacts\": {";
  for (std::size_t i = 0; i < file_hashes.size(); ++i) {
    if (i) s += ",";
    s += "\n    \"" + file_hashes[i].first + "\": \"" + file_hashes[i].second + "\"";
  }
  if (!file_hashes.empty()) s += "\n  ";
  return s + "}\n}\n";
}

}  // namespace poislearn
