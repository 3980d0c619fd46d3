#pragma once

// Artifact formats: checkpoints, trajectory JSONL, loss curves, metric
// reports, the merged summary CSV, histograms, and run manifests. Writers
// are hand rolled so every byte is deterministic; readers use nlohmann.

#include <openssl/evp.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "poislearn/integrate.hpp"
#include "poislearn/metrics.hpp"
#include "poislearn/nets.hpp"
#include "poislearn/tensor.hpp"
#include "poislearn/train.hpp"

namespace poislearn {

using njson = nlohmann::json;

// 17 significant digits round-trip any IEEE double exactly.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

// NaN and infinities are not valid JSON numbers; reports encode them as
// null and signed "inf" strings.
inline std::string json_number(double v) {
  if (std::isnan(v)) return "null";
  if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
  return fmt17(v);
}

inline double number_from_json(const njson& v) {
  if (v.is_null()) return NAN;
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    throw std::runtime_error("unexpected string where a number was expected: " + s);
  }
  return v.get<double>();
}

inline std::string json_array(const Vec& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += fmt17(v[i]);
  }
  return s + "]";
}

// Nested arrays, one inner array per row.
inline std::string json_matrix(const Tensor& t) {
  std::string s = "[";
  for (int r = 0; r < t.rows; ++r) {
    if (r) s += ",";
    s += "[";
    for (int c = 0; c < t.cols; ++c) {
      if (c) s += ",";
      s += fmt17(t(r, c));
    }
    s += "]";
  }
  return s + "]";
}

inline Tensor matrix_from_json(const njson& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw std::runtime_error("expected a nested array of rows");
  }
  Tensor t(static_cast<int>(j.size()), static_cast<int>(j[0].size()));
  for (int r = 0; r < t.rows; ++r) {
    const njson& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != t.cols) {
      throw std::runtime_error("ragged matrix rows");
    }
    for (int c = 0; c < t.cols; ++c) t(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return t;
}

inline Tensor col_from_json(const njson& j) {
  if (!j.is_array()) throw std::runtime_error("expected a flat array");
  Vec v(j.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
  return Tensor::col_vec(v);
}

inline std::string mlp_json(const MlpParams& p) {
  return "{\"w1\":" + json_matrix(p.w1) + ",\"b1\":" + json_array(p.b1.d) +
         ",\"w2\":" + json_matrix(p.w2) + ",\"b2\":" + json_array(p.b2.d) + "}";
}

inline MlpParams mlp_from_json(const njson& j) {
  MlpParams p;
  p.w1 = matrix_from_json(j.at("w1"));
  p.b1 = col_from_json(j.at("b1"));
  p.w2 = matrix_from_json(j.at("w2"));
  p.b2 = col_from_json(j.at("b2"));
  if (p.b1.rows != p.w1.rows || p.w2.cols != p.w1.rows || p.b2.rows != p.w2.rows) {
    throw std::runtime_error("inconsistent layer shapes in checkpoint");
  }
  return p;
}

inline std::string checkpoint_json(const ModelSet& ms) {
  std::string s = "{\"flavor\":\"";
  s += flavor_name(ms.flavor);
  s += "\",\"n\":" + std::to_string(ms.n);
  s += ",\"hidden\":" + std::to_string(ms.hidden);
  s += ",\"seed\":" + std::to_string(ms.seed);
  s += ",\"h_params\":" + mlp_json(ms.h);
  if (ms.flavor == Flavor::IJ) {
    s += ",\"casimir_params\":" + mlp_json(ms.c);
    s += ",\"phi_params\":" + mlp_json(ms.phi);
  } else {
    s += ",\"l_params\":" + mlp_json(ms.l);
  }
  return s + "}\n";
}

inline ModelSet checkpoint_from_json(const std::string& text) {
  njson j = njson::parse(text);
  ModelSet ms;
  ms.flavor = parse_flavor(j.at("flavor").get<std::string>());
  ms.n = j.at("n").get<int>();
  ms.hidden = j.at("hidden").get<int>();
  ms.seed = j.at("seed").get<std::uint64_t>();
  ms.h = mlp_from_json(j.at("h_params"));
  if (ms.flavor == Flavor::IJ) {
    ms.c = mlp_from_json(j.at("casimir_params"));
    ms.phi = mlp_from_json(j.at("phi_params"));
  } else {
    ms.l = mlp_from_json(j.at("l_params"));
  }
  auto check = [&](const MlpParams& p, int out, const char* name) {
    if (p.in() != ms.n || p.hidden() != ms.hidden || p.out() != out) {
      throw std::runtime_error(std::string("checkpoint shape mismatch in ") + name);
    }
  };
  check(ms.h, 1, "h_params");
  if (ms.flavor == Flavor::IJ) {
    if (ms.n != 3) throw std::runtime_error("ij checkpoint must have n = 3");
    check(ms.c, 1, "casimir_params");
    check(ms.phi, 1, "phi_params");
  } else {
    check(ms.l, upper_count(ms.n), "l_params");
  }
  return ms;
}

// One trajectory per line; truncated runs just carry fewer states.
inline std::string trajectory_json_line(const Trajectory& tr) {
  std::string s = "{\"system\":\"" + tr.system + "\",\"seed\":" + std::to_string(tr.seed) +
                  ",\"dt\":" + fmt17(tr.dt) + ",\"states\":[";
  for (std::size_t i = 0; i < tr.states.size(); ++i) {
    if (i) s += ",";
    s += json_array(tr.states[i]);
  }
  return s + "]}";
}

inline std::string trajectories_jsonl(const std::vector<Trajectory>& trs) {
  std::string s;
  for (const auto& tr : trs) s += trajectory_json_line(tr) + "\n";
  return s;
}

inline Trajectory trajectory_from_json_line(const std::string& line) {
  njson j = njson::parse(line);
  Trajectory tr;
  tr.system = j.at("system").get<std::string>();
  tr.seed = j.at("seed").get<std::uint64_t>();
  tr.dt = j.at("dt").get<double>();
  for (const njson& st : j.at("states")) {
    Vec x(st.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = st[i].get<double>();
    tr.states.push_back(std::move(x));
  }
  return tr;
}

inline std::vector<Trajectory> trajectories_from_jsonl(const std::string& text) {
  std::vector<Trajectory> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(trajectory_from_json_line(line));
  }
  return out;
}

inline std::string losses_csv(const std::vector<EpochRow>& curve) {
  std::string s = "epoch,train_loss,val_loss,val_jacobiator\n";
  for (const auto& r : curve) {
    s += std::to_string(r.epoch) + "," + fmt17(r.train_loss) + "," + fmt17(r.val_loss) + "," +
         fmt17(r.val_jacobiator) + "\n";
  }
  return s;
}

inline std::string report_json(const MetricsReport& rep) {
  std::string s = "{\n";
  s += "  \"system\": \"" + rep.system + "\",\n";
  s += "  \"flavor\": \"" + rep.flavor + "\",\n";
  s += "  \"seed\": " + std::to_string(rep.seed) + ",\n";
  s += "  \"traj_error\": " + json_number(rep.traj_error) + ",\n";
  s += "  \"delta_M\": " + json_number(rep.delta_M) + ",\n";
  s += "  \"delta_r\": " + json_number(rep.delta_r) + ",\n";
  s += "  \"delta_L\": " + json_number(rep.delta_L) + ",\n";
  s += "  \"det_L\": " + json_number(rep.det_L) + ",\n";
  s += std::string("  \"det_is_log\": ") + (rep.det_is_log ? "true" : "false") + ",\n";
  s += "  \"casimir_drift\": {";
  bool first = true;
  for (const auto& [key, value] : rep.casimir_drift) {
    if (!first) s += ", ";
    s += "\"" + key + "\": " + json_number(value);
    first = false;
  }
  s += "},\n";
  s += "  \"jacobiator_norm\": " + json_number(rep.jacobiator_norm) + ",\n";
  s += "  \"gauge_scale\": " + json_number(rep.gauge_scale) + ",\n";
  s += "  \"gt_trajectories\": " + std::to_string(rep.gt_trajectories) + ",\n";
  s += "  \"rollout_failures\": " + std::to_string(rep.rollout_failures) + "\n";
  return s + "}\n";
}

inline MetricsReport report_from_json(const std::string& text) {
  njson j = njson::parse(text);
  MetricsReport rep;
  rep.system = j.at("system").get<std::string>();
  rep.flavor = j.at("flavor").get<std::string>();
  rep.seed = j.at("seed").get<std::uint64_t>();
  rep.traj_error = number_from_json(j.at("traj_error"));
  rep.delta_M = number_from_json(j.at("delta_M"));
  rep.delta_r = number_from_json(j.at("delta_r"));
  rep.delta_L = number_from_json(j.at("delta_L"));
  rep.det_L = number_from_json(j.at("det_L"));
  rep.det_is_log = j.at("det_is_log").get<bool>();
  for (const auto& [key, value] : j.at("casimir_drift").items()) {
    rep.casimir_drift[key] = number_from_json(value);
  }
  rep.jacobiator_norm = number_from_json(j.at("jacobiator_norm"));
  rep.gauge_scale = number_from_json(j.at("gauge_scale"));
  rep.gt_trajectories = j.at("gt_trajectories").get<int>();
  rep.rollout_failures = j.at("rollout_failures").get<int>();
  return rep;
}

inline std::string merged_csv_header() {
  return "system,flavor,seed,delta_M,delta_r,delta_L,delta_M2,delta_rxM,delta_r2,delta_Mdotr,"
         "det_L,det_is_log,jacobiator_norm,traj_error\n";
}

// Summary cells; N/A marks metrics that do not apply to a system.
inline std::string csv_cell(double v) {
  if (std::isnan(v)) return "N/A";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return std::string(buf);
}

inline std::string merged_csv_row(const MetricsReport& rep) {
  auto drift = [&](const char* key) {
    auto it = rep.casimir_drift.find(key);
    return it == rep.casimir_drift.end() ? std::string("N/A") : csv_cell(it->second);
  };
  std::string s = rep.system + "," + rep.flavor + "," + std::to_string(rep.seed) + ",";
  s += csv_cell(rep.delta_M) + "," + csv_cell(rep.delta_r) + "," + csv_cell(rep.delta_L) + ",";
  s += drift("delta_M2") + "," + drift("delta_rxM") + "," + drift("delta_r2") + "," +
       drift("delta_Mdotr") + ",";
  s += csv_cell(rep.det_L) + "," + (rep.det_is_log ? "1" : "0") + ",";
  s += csv_cell(rep.jacobiator_norm) + "," + csv_cell(rep.traj_error) + "\n";
  return s;
}

// One log10 value per row; non-positive samples clamp to the same floor the
// reports use.
inline std::string histogram_csv(const std::string& column, const std::vector<double>& samples) {
  std::string s = "log10_" + column + "\n";
  for (double v : samples) {
    s += fmt17(v > 0 ? std::log10(v) : detail::kLogFloor) + "\n";
  }
  return s;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) throw std::runtime_error("short write: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace poislearn
