// Command line front end: simulate reference trajectories, train a model
// flavor, evaluate a checkpoint into a metrics report, classify a system
// from flavor errors, and merge reports into one summary CSV.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "poislearn/config.hpp"
#include "poislearn/io.hpp"
#include "poislearn/metrics.hpp"
#include "poislearn/nets.hpp"
#include "poislearn/systems.hpp"
#include "poislearn/train.hpp"

namespace pl = poislearn;
namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::string system = "rb";
  std::string flavor = "wj";
  std::uint64_t seed = 0;
  double dt = 0.05;
  double lr = 1e-3;
  double jacobi_weight = 1.0;
  double val_fraction = 0.2;
  int steps = 100;
  int trajectories = 200;
  int gt_trajectories = 400;
  int hidden = 64;
  int epochs = 300;
  int batch_size = 128;
  int unroll_iters = 10;
  std::string out = "out";
  bool plots = false;
  std::string checkpoint;
  std::string metric = "traj_error";
};

void add_core_flags(CLI::App* c, Flags& f) {
  c->add_option("--config", f.config, "JSON config file; explicit flags override its keys");
  c->add_option("--system", f.system, "dynamical system: rb, p2d, sh, p3d, ht, rbdis")
      ->capture_default_str();
  c->add_option("--seed", f.seed, "master seed for every random stream")->capture_default_str();
  c->add_option("--out", f.out, "output root directory")->capture_default_str();
}

void add_rollout_flags(CLI::App* c, Flags& f) {
  c->add_option("--dt", f.dt, "integrator step size")->capture_default_str();
  c->add_option("--steps", f.steps, "steps per trajectory")->capture_default_str();
}

// Provided flags land in a JSON override object so they pass the same typed
// validation as config files.
pl::RunConfig resolve_config(CLI::App* cmd, const Flags& f) {
  pl::RunConfig cfg;
  bool traj_set = false;
  if (cmd->count("--config") > 0) {
    std::string text;
    try {
      text = pl::read_file(f.config);
    } catch (const std::runtime_error& e) {
      throw pl::ConfigError(e.what());
    }
    pl::njson j = pl::njson::parse(text, nullptr, false);
    if (j.is_discarded()) throw pl::ConfigError("config file is not valid JSON: " + f.config);
    pl::apply_config_json(cfg, j);
    traj_set = j.contains("trajectories");
  }
  auto has = [&](const std::string& name) {
    return cmd->get_option_no_throw(name) != nullptr && cmd->count(name) > 0;
  };
  pl::njson o = pl::njson::object();
  if (has("--system")) o["system"] = f.system;
  if (has("--flavor")) o["flavor"] = f.flavor;
  if (has("--seed")) o["seed"] = f.seed;
  if (has("--dt")) o["dt"] = f.dt;
  if (has("--steps")) o["steps"] = f.steps;
  if (has("--trajectories")) {
    o["trajectories"] = f.trajectories;
    traj_set = true;
  }
  if (has("--gt-trajectories")) o["gt_trajectories"] = f.gt_trajectories;
  if (has("--hidden")) o["hidden"] = f.hidden;
  if (has("--lr")) o["lr"] = f.lr;
  if (has("--epochs")) o["epochs"] = f.epochs;
  if (has("--batch-size")) o["batch_size"] = f.batch_size;
  if (has("--jacobi-weight")) o["jacobi_weight"] = f.jacobi_weight;
  if (has("--unroll-iters")) o["unroll_iters"] = f.unroll_iters;
  if (has("--val-fraction")) o["val_fraction"] = f.val_fraction;
  if (has("--out")) o["out"] = f.out;
  if (has("--plots")) o["plots"] = f.plots;
  if (has("--checkpoint")) o["checkpoint"] = f.checkpoint;
  if (has("--metric")) o["metric"] = f.metric;
  pl::apply_config_json(cfg, o);
  // The default trajectory budget depends on the system; only pin it when
  // neither the config file nor a flag chose one.
  if (!traj_set) {
    cfg.train.n_train_traj =
        pl::TrainConfig::defaults_for(cfg.train.system, cfg.train.flavor).n_train_traj;
  }
  return cfg;
}

void write_manifest(const fs::path& dir, const std::string& command, const pl::RunConfig& cfg,
                    const std::vector<std::string>& files) {
  std::vector<std::pair<std::string, std::string>> hashes;
  for (const auto& name : files) {
    hashes.emplace_back(name, pl::sha256_hex(pl::read_file(dir / name)));
  }
  pl::write_file(dir / "manifest.json", pl::manifest_json(command, cfg, hashes));
}

int cmd_simulate(CLI::App* cmd, const Flags& f) {
  pl::RunConfig cfg = resolve_config(cmd, f);
  cfg.train.validate();
  auto spec = pl::SystemSpec::make(cfg.train.system);
  auto gt = pl::ground_truth(spec);
  auto keep = pl::state_guard(cfg.train.system);
  auto ics = pl::sample_initial_conditions(spec, cfg.train.n_train_traj,
                                           pl::derive_seed(cfg.train.seed, pl::Stream::TrainIc));
  std::vector<pl::Trajectory> trs;
  int truncated = 0;
  for (const auto& ic : ics) {
    auto tr = pl::simulate(gt.field, ic, cfg.train.dt, cfg.train.steps, keep);
    tr.system = pl::system_name(cfg.train.system);
    tr.seed = cfg.train.seed;
    if (tr.failure_index) ++truncated;
    trs.push_back(std::move(tr));
  }
  fs::path dir = fs::path(cfg.out_dir) / pl::system_name(cfg.train.system) / "sim" /
                 std::to_string(cfg.train.seed);
  pl::write_file(dir / "trajectories.jsonl", pl::trajectories_jsonl(trs));
  write_manifest(dir, "simulate", cfg, {"trajectories.jsonl"});
  std::printf("wrote %zu trajectories (%d truncated) to %s\n", trs.size(), truncated,
              (dir / "trajectories.jsonl").c_str());
  return 0;
}

int cmd_train(CLI::App* cmd, const Flags& f) {
  pl::RunConfig cfg = resolve_config(cmd, f);
  if (cfg.train.flavor == pl::Flavor::IJ && pl::system_dim(cfg.train.system) != 3) {
    throw pl::ConfigError("IJ flavor is 3D-only");
  }
  cfg.train.validate();
  auto result = pl::train(cfg.train);

  fs::path dir = pl::run_dir(cfg);
  pl::write_file(dir / "checkpoint.json", pl::checkpoint_json(result.best));
  pl::write_file(dir / "losses.csv", pl::losses_csv(result.curve));
  std::vector<std::string> files{"checkpoint.json", "losses.csv"};
  if (cfg.plots) {
    std::string dat = "# epoch train_loss val_loss val_jacobiator\n";
    for (const auto& r : result.curve) {
      dat += std::to_string(r.epoch) + " " + pl::fmt17(r.train_loss) + " " +
             pl::fmt17(r.val_loss) + " " + pl::fmt17(r.val_jacobiator) + "\n";
    }
    pl::write_file(dir / "plots" / "losses.dat", dat);
    files.push_back("plots/losses.dat");
  }
  write_manifest(dir, "train", cfg, files);
  std::printf("trained %s/%s seed %llu: %d step pairs, best epoch %d, best val loss %.6g\n",
              pl::system_name(cfg.train.system), pl::flavor_name(cfg.train.flavor),
              static_cast<unsigned long long>(cfg.train.seed), result.dataset_pairs,
              result.best_epoch, result.best_val_loss);
  std::printf("artifacts in %s\n", dir.c_str());
  if (result.aborted) {
    std::fprintf(stderr, "training diverged: validation loss non-finite three epochs running\n");
    return 3;
  }
  return 0;
}

int cmd_evaluate(CLI::App* cmd, const Flags& f) {
  pl::RunConfig cfg = resolve_config(cmd, f);
  fs::path ckpt =
      cfg.checkpoint.empty() ? pl::run_dir(cfg) / "checkpoint.json" : fs::path(cfg.checkpoint);
  std::string text;
  try {
    text = pl::read_file(ckpt);
  } catch (const std::runtime_error& e) {
    throw pl::ConfigError(e.what());
  }
  pl::ModelSet ms;
  try {
    ms = pl::checkpoint_from_json(text);
  } catch (const std::exception& e) {
    throw pl::ConfigError("bad checkpoint " + ckpt.string() + ": " + e.what());
  }
  if (ms.n != pl::system_dim(cfg.train.system)) {
    throw pl::ConfigError("checkpoint dimension does not match --system");
  }
  cfg.train.flavor = ms.flavor;
  cfg.train.hidden = ms.hidden;
  cfg.train.validate();

  auto ev = pl::evaluate_gt(ms, cfg.train);
  pl::MetricsSamples samples;
  auto rep = pl::build_report(ms, ev, cfg.train, &samples);

  fs::path dir = pl::run_dir(cfg);
  pl::write_file(dir / "report.json", pl::report_json(rep));
  std::vector<std::string> files{"report.json"};
  std::vector<std::pair<std::string, const std::vector<double>*>> hists{
      {"det", &samples.det_abs},
      {"trajectory_deviation", &ev.sq_dev_full},
  };
  if (!samples.structure_sq.empty()) hists.emplace_back("structure_residual", &samples.structure_sq);
  for (const auto& [name, vals] : hists) {
    std::string rel = "histograms/" + name + ".csv";
    pl::write_file(dir / rel, pl::histogram_csv(name, *vals));
    files.push_back(rel);
    if (cfg.plots) {
      std::string dat;
      for (double v : *vals) dat += pl::fmt17(v > 0 ? std::log10(v) : pl::detail::kLogFloor) + "\n";
      std::string drel = "plots/" + name + ".dat";
      pl::write_file(dir / drel, dat);
      files.push_back(drel);
    }
  }
  write_manifest(dir, "evaluate", cfg, files);
  std::printf("evaluated %s/%s seed %llu over %d reference trajectories\n", rep.system.c_str(),
              rep.flavor.c_str(), static_cast<unsigned long long>(rep.seed), rep.gt_trajectories);
  std::printf("traj_error=%s delta_L=%s det_L=%s jacobiator_norm=%s gauge_scale=%s\n",
              pl::csv_cell(rep.traj_error).c_str(), pl::csv_cell(rep.delta_L).c_str(),
              pl::csv_cell(rep.det_L).c_str(), pl::csv_cell(rep.jacobiator_norm).c_str(),
              pl::csv_cell(rep.gauge_scale).c_str());
  std::printf("report in %s\n", (dir / "report.json").c_str());
  return 0;
}

int cmd_classify(const std::string& metric, const std::vector<std::string>& report_paths,
                 const std::string& verdict_out) {
  if (report_paths.size() < 2) throw pl::ConfigError("classify needs at least two flavor reports");
  std::vector<pl::MetricsReport> reps;
  for (const auto& p : report_paths) {
    try {
      reps.push_back(pl::report_from_json(pl::read_file(p)));
    } catch (const std::exception& e) {
      throw pl::ConfigError("cannot read report " + p + ": " + e.what());
    }
  }
  for (const auto& r : reps) {
    if (r.system != reps[0].system) {
      throw pl::ConfigError("classification reports must come from a single system");
    }
  }
  auto cell = [&](const pl::MetricsReport& r) {
    if (metric == "traj_error") return r.traj_error;
    if (metric == "delta_M") return r.delta_M;
    if (metric == "delta_L") return r.delta_L;
    throw pl::ConfigError("unknown metric: " + metric);
  };
  std::map<pl::Flavor, double> errors;
  for (const auto& r : reps) {
    pl::Flavor fl;
    try {
      fl = pl::parse_flavor(r.flavor);
    } catch (const std::invalid_argument& e) {
      throw pl::ConfigError(e.what());
    }
    if (errors.count(fl)) throw pl::ConfigError("duplicate flavor report: " + r.flavor);
    errors[fl] = cell(r);
  }
  pl::Verdict verdict;
  try {
    verdict = pl::classify_hamiltonianity(errors);
  } catch (const std::invalid_argument& e) {
    throw pl::ConfigError(e.what());
  }

  std::string line = "system=" + reps[0].system + " metric=" + metric;
  std::string j = "{\n  \"system\": \"" + reps[0].system + "\",\n  \"metric\": \"" + metric +
                  "\",\n  \"errors\": {";
  bool first = true;
  for (const auto& [fl, val] : errors) {
    if (!first) j += ", ";
    j += std::string("\"") + pl::flavor_name(fl) + "\": " + pl::json_number(val);
    line += std::string(" ") + pl::flavor_name(fl) + "=" + pl::csv_cell(val);
    first = false;
  }
  j += std::string("},\n  \"verdict\": \"") + pl::verdict_name(verdict) + "\"\n}\n";
  line += std::string(" verdict=") + pl::verdict_name(verdict);
  std::puts(line.c_str());

  fs::path outp = verdict_out.empty()
                      ? fs::path(report_paths[0]).parent_path() / "classification.json"
                      : fs::path(verdict_out);
  pl::write_file(outp, j);
  std::printf("verdict in %s\n", outp.c_str());
  return 0;
}

int cmd_report_merge(const std::string& root, const std::string& out_path) {
  if (!fs::is_directory(root)) throw pl::ConfigError("no such directory: " + root);
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().filename() == "report.json") {
      paths.push_back(entry.path());
    }
  }
  std::sort(paths.begin(), paths.end());
  std::vector<pl::MetricsReport> reps;
  for (const auto& p : paths) {
    try {
      reps.push_back(pl::report_from_json(pl::read_file(p)));
    } catch (const std::exception& e) {
      throw pl::ConfigError("cannot read report " + p.string() + ": " + e.what());
    }
  }
  auto flavor_rank = [](const std::string& name) {
    try {
      return static_cast<int>(pl::parse_flavor(name));
    } catch (const std::invalid_argument&) {
      return 99;
    }
  };
  std::sort(reps.begin(), reps.end(), [&](const pl::MetricsReport& a, const pl::MetricsReport& b) {
    if (a.system != b.system) return a.system < b.system;
    if (a.flavor != b.flavor) return flavor_rank(a.flavor) < flavor_rank(b.flavor);
    return a.seed < b.seed;
  });
  std::string csv = pl::merged_csv_header();
  for (const auto& r : reps) csv += pl::merged_csv_row(r);
  fs::path outp = out_path.empty() ? fs::path(root) / "merged.csv" : fs::path(out_path);
  pl::write_file(outp, csv);
  std::printf("merged %zu reports into %s\n", reps.size(), outp.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learning Poisson dynamics from trajectories"};
  app.require_subcommand(1);

  Flags fsim, ftr, fev;
  std::vector<std::string> report_paths;
  std::string classify_metric = "traj_error", verdict_out;
  std::string merge_root = "out", merge_out;

  CLI::App* sim = app.add_subcommand("simulate", "integrate reference trajectories to JSONL");
  add_core_flags(sim, fsim);
  add_rollout_flags(sim, fsim);
  sim->add_option("--trajectories", fsim.trajectories, "number of trajectories")
      ->capture_default_str();

  CLI::App* tr = app.add_subcommand("train", "train one model flavor on simulated step pairs");
  add_core_flags(tr, ftr);
  add_rollout_flags(tr, ftr);
  tr->add_option("--trajectories", ftr.trajectories, "training trajectories")
      ->capture_default_str();
  tr->add_option("--flavor", ftr.flavor, "model flavor: wj, sj, ij")->capture_default_str();
  tr->add_option("--gt-trajectories", ftr.gt_trajectories, "held-out trajectories for evaluation")
      ->capture_default_str();
  tr->add_option("--hidden", ftr.hidden, "hidden units per network")->capture_default_str();
  tr->add_option("--lr", ftr.lr, "Adam learning rate")->capture_default_str();
  tr->add_option("--epochs", ftr.epochs, "training epochs")->capture_default_str();
  tr->add_option("--batch-size", ftr.batch_size, "minibatch size")->capture_default_str();
  tr->add_option("--jacobi-weight", ftr.jacobi_weight, "sj structure penalty weight")
      ->capture_default_str();
  tr->add_option("--unroll-iters", ftr.unroll_iters, "fixed-point iterations in the training step")
      ->capture_default_str();
  tr->add_option("--val-fraction", ftr.val_fraction, "fraction of pairs held out for validation")
      ->capture_default_str();
  tr->add_flag("--plots", ftr.plots, "also write gnuplot-ready data files");

  CLI::App* ev = app.add_subcommand("evaluate", "report metrics for a trained checkpoint");
  add_core_flags(ev, fev);
  add_rollout_flags(ev, fev);
  ev->add_option("--flavor", fev.flavor, "run directory flavor when --checkpoint is not given")
      ->capture_default_str();
  ev->add_option("--gt-trajectories", fev.gt_trajectories, "held-out trajectories to compare")
      ->capture_default_str();
  ev->add_option("--checkpoint", fev.checkpoint,
                 "checkpoint path (default: <out>/<system>/<flavor>/<seed>/checkpoint.json)");
  ev->add_flag("--plots", fev.plots, "also write gnuplot-ready data files");

  CLI::App* cl = app.add_subcommand("classify", "order flavor errors into a hamiltonianity verdict");
  cl->add_option("reports", report_paths, "report.json files, one per flavor")->required();
  cl->add_option("--metric", classify_metric, "report cell to compare: traj_error, delta_M, delta_L")
      ->capture_default_str();
  cl->add_option("--out", verdict_out, "verdict file (default: classification.json beside the first report)");

  CLI::App* rm = app.add_subcommand("report-merge", "merge every report.json under a tree into one CSV");
  rm->add_option("root", merge_root, "directory tree to scan")->capture_default_str();
  rm->add_option("--out", merge_out, "merged CSV path (default: <root>/merged.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim, fsim);
    if (tr->parsed()) return cmd_train(tr, ftr);
    if (ev->parsed()) return cmd_evaluate(ev, fev);
    if (cl->parsed()) return cmd_classify(classify_metric, report_paths, verdict_out);
    if (rm->parsed()) return cmd_report_merge(merge_root, merge_out);
  } catch (const pl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const pl::StepFailure& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
