#include <gtest/gtest.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>

#include "poislearn/config.hpp"
#include "poislearn/io.hpp"
#include "poislearn/nets.hpp"
#include "poislearn/systems.hpp"

namespace pl = poislearn;

namespace {

bool tensors_equal(const pl::Tensor& a, const pl::Tensor& b) {
  return a.rows == b.rows && a.cols == b.cols &&
         std::memcmp(a.d.data(), b.d.data(), a.d.size() * sizeof(double)) == 0;
}

bool mlps_equal(const pl::MlpParams& a, const pl::MlpParams& b) {
  return tensors_equal(a.w1, b.w1) && tensors_equal(a.b1, b.b1) && tensors_equal(a.w2, b.w2) &&
         tensors_equal(a.b2, b.b2);
}

}  // namespace

TEST(Io, Fmt17RoundTripsDoublesExactly) {
  for (double v : {1.0 / 3.0, 0.05, -1.2345678901234567e-300, 1e308, 0.1 + 0.2, -0.0}) {
    std::string s = pl::fmt17(v);
    double back = std::strtod(s.c_str(), nullptr);
    EXPECT_EQ(std::memcmp(&back, &v, sizeof v), 0) << s;
  }
}

TEST(Io, JsonNumberEncodesSpecialValues) {
  EXPECT_EQ(pl::json_number(NAN), "null");
  EXPECT_EQ(pl::json_number(INFINITY), "\"inf\"");
  EXPECT_EQ(pl::json_number(-INFINITY), "\"-inf\"");
  EXPECT_EQ(pl::json_number(2.0), "2");
}

TEST(Io, CheckpointRoundTripsAllFlavors) {
  for (auto flavor : {pl::Flavor::WJ, pl::Flavor::SJ, pl::Flavor::IJ}) {
    int n = 3;
    auto ms = pl::init_models(flavor, n, 8, 42);
    std::string text = pl::checkpoint_json(ms);
    auto back = pl::checkpoint_from_json(text);
    EXPECT_EQ(back.flavor, ms.flavor);
    EXPECT_EQ(back.n, ms.n);
    EXPECT_EQ(back.hidden, ms.hidden);
    EXPECT_EQ(back.seed, ms.seed);
    EXPECT_TRUE(mlps_equal(back.h, ms.h));
    if (flavor == pl::Flavor::IJ) {
      EXPECT_TRUE(mlps_equal(back.c, ms.c));
      EXPECT_TRUE(mlps_equal(back.phi, ms.phi));
    } else {
      EXPECT_TRUE(mlps_equal(back.l, ms.l));
    }
    EXPECT_EQ(pl::checkpoint_json(back), text);
  }
}

TEST(Io, CheckpointUsesFlavorSpecificKeys) {
  auto wj = pl::checkpoint_json(pl::init_models(pl::Flavor::WJ, 4, 6, 7));
  EXPECT_NE(wj.find("\"l_params\""), std::string::npos);
  EXPECT_EQ(wj.find("casimir_params"), std::string::npos);
  EXPECT_EQ(wj.find("phi_params"), std::string::npos);
  EXPECT_EQ(wj.rfind("{\"flavor\":\"wj\",\"n\":4,\"hidden\":6,\"seed\":7,", 0), 0u);

  auto ij = pl::checkpoint_json(pl::init_models(pl::Flavor::IJ, 3, 6, 7));
  EXPECT_NE(ij.find("\"casimir_params\""), std::string::npos);
  EXPECT_NE(ij.find("\"phi_params\""), std::string::npos);
  EXPECT_EQ(ij.find("l_params"), std::string::npos);
}

TEST(Io, CheckpointRejectsInconsistentShapes) {
  auto ms = pl::init_models(pl::Flavor::WJ, 3, 8, 1);
  std::string text = pl::checkpoint_json(ms);
  std::string bad = text;
  bad.replace(bad.find("\"n\":3"), 5, "\"n\":4");
  EXPECT_THROW(pl::checkpoint_from_json(bad), std::runtime_error);
  EXPECT_THROW(pl::checkpoint_from_json("{\"flavor\":\"wj\"}"), std::exception);
}

TEST(Io, TrajectoryJsonlRoundTrips) {
  auto spec = pl::SystemSpec::make(pl::SystemName::RB);
  auto gt = pl::ground_truth(spec);
  auto ics = pl::sample_initial_conditions(spec, 2, pl::derive_seed(11, pl::Stream::TrainIc));
  std::vector<pl::Trajectory> trs;
  for (const auto& ic : ics) {
    auto tr = pl::simulate(gt.field, ic, 0.05, 10);
    tr.system = "rb";
    tr.seed = 11;
    trs.push_back(std::move(tr));
  }
  std::string text = pl::trajectories_jsonl(trs);

  auto back = pl::trajectories_from_jsonl(text);
  ASSERT_EQ(back.size(), trs.size());
  for (std::size_t k = 0; k < trs.size(); ++k) {
    EXPECT_EQ(back[k].system, "rb");
    EXPECT_EQ(back[k].seed, trs[k].seed);
    EXPECT_EQ(back[k].dt, trs[k].dt);
    ASSERT_EQ(back[k].states.size(), trs[k].states.size());
    for (std::size_t i = 0; i < trs[k].states.size(); ++i) {
      EXPECT_EQ(std::memcmp(back[k].states[i].data(), trs[k].states[i].data(),
                            trs[k].states[i].size() * sizeof(double)),
                0);
    }
  }
  EXPECT_EQ(text.rfind("{\"system\":\"rb\",\"seed\":11,\"dt\":0.05", 0), 0u);
}

TEST(Io, LossesCsvHasHeaderAndOneRowPerEpoch) {
  std::vector<pl::EpochRow> curve{{0, 0.5, 0.25, 0.0}, {1, 0.25, NAN, 1e-3}};
  std::string csv = pl::losses_csv(curve);
  EXPECT_EQ(csv.rfind("epoch,train_loss,val_loss,val_jacobiator\n", 0), 0u);
  EXPECT_NE(csv.find("0,0.5,0.25,0\n"), std::string::npos);
  EXPECT_NE(csv.find("1,0.25,nan,0.001"), std::string::npos);
}

TEST(Io, ReportRoundTripsSpecialValues) {
  pl::MetricsReport rep;
  rep.system = "rb";
  rep.flavor = "sj";
  rep.seed = 3;
  rep.traj_error = 1.5e-3;
  rep.delta_M = 2.5e-4;
  rep.delta_r = NAN;
  rep.delta_L = -6.25;
  rep.det_L = -INFINITY;
  rep.det_is_log = true;
  rep.casimir_drift["delta_M2"] = 1e-11;
  rep.jacobiator_norm = 0.02;
  rep.gauge_scale = 1.3;
  rep.gt_trajectories = 40;
  rep.rollout_failures = 1;

  std::string text = pl::report_json(rep);
  auto back = pl::report_from_json(text);
  EXPECT_EQ(back.system, "rb");
  EXPECT_EQ(back.flavor, "sj");
  EXPECT_EQ(back.seed, 3u);
  EXPECT_EQ(back.traj_error, rep.traj_error);
  EXPECT_TRUE(std::isnan(back.delta_r));
  EXPECT_EQ(back.det_L, -INFINITY);
  EXPECT_TRUE(back.det_is_log);
  EXPECT_EQ(back.casimir_drift.at("delta_M2"), 1e-11);
  EXPECT_EQ(back.rollout_failures, 1);
  EXPECT_EQ(pl::report_json(back), text);
  EXPECT_NE(text.find("\"delta_r\": null"), std::string::npos);
  EXPECT_NE(text.find("\"det_L\": \"-inf\""), std::string::npos);
}

TEST(Io, MergedCsvMarksMissingCellsNa) {
  pl::MetricsReport rep;
  rep.system = "p2d";
  rep.flavor = "wj";
  rep.seed = 1;
  rep.traj_error = 2e-4;
  rep.delta_M = 1e-4;
  rep.det_L = 0.93;
  rep.casimir_drift["delta_rxM"] = 3e-9;
  rep.jacobiator_norm = 0.1;

  std::string header = pl::merged_csv_header();
  std::string row = pl::merged_csv_row(rep);
  auto count = [](const std::string& s, char c) {
    return std::count(s.begin(), s.end(), c);
  };
  EXPECT_EQ(count(header, ','), count(row, ','));
  EXPECT_EQ(row.rfind("p2d,wj,1,0.0001,N/A,N/A,N/A,3e-09,N/A,N/A,0.93,0,", 0), 0u) << row;
}

TEST(Io, HistogramCsvWritesLog10WithFloor) {
  std::string csv = pl::histogram_csv("det", {100.0, 1e-3, 0.0});
  EXPECT_EQ(csv, "log10_det\n2\n-3\n-400\n");
}

TEST(Io, Sha256MatchesKnownVectors) {
  EXPECT_EQ(pl::sha256_hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(pl::sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Io, FileRoundTripCreatesParentDirectories) {
  auto dir = std::filesystem::temp_directory_path() / "poislearn_io_test";
  std::filesystem::remove_all(dir);
  auto path = dir / "a" / "b" / "data.txt";
  pl::write_file(path, "hello\n");
  EXPECT_EQ(pl::read_file(path), "hello\n");
  EXPECT_THROW(pl::read_file(dir / "missing.txt"), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST(Config, AppliesEveryKeyAndEchoRoundTrips) {
  pl::RunConfig cfg;
  pl::njson j = pl::njson::parse(R"({
    "system": "ht", "flavor": "sj", "seed": 9, "dt": 0.02, "steps": 50,
    "trajectories": 25, "gt_trajectories": 60, "hidden": 16, "lr": 0.005,
    "epochs": 12, "batch_size": 32, "jacobi_weight": 0.5, "unroll_iters": 6,
    "val_fraction": 0.25, "out": "runs", "plots": true,
    "checkpoint": "runs/ht/sj/9/checkpoint.json", "metric": "traj_error"
  })");
  pl::apply_config_json(cfg, j);
  EXPECT_EQ(cfg.train.system, pl::SystemName::HT);
  EXPECT_EQ(cfg.train.flavor, pl::Flavor::SJ);
  EXPECT_EQ(cfg.train.seed, 9u);
  EXPECT_EQ(cfg.train.dt, 0.02);
  EXPECT_EQ(cfg.train.steps, 50);
  EXPECT_EQ(cfg.train.n_train_traj, 25);
  EXPECT_EQ(cfg.train.n_gt_traj, 60);
  EXPECT_EQ(cfg.train.hidden, 16);
  EXPECT_EQ(cfg.train.lr, 0.005);
  EXPECT_EQ(cfg.train.epochs, 12);
  EXPECT_EQ(cfg.train.batch_size, 32);
  EXPECT_EQ(cfg.train.jacobi_weight, 0.5);
  EXPECT_EQ(cfg.train.unroll_iters, 6);
  EXPECT_EQ(cfg.train.val_fraction, 0.25);
  EXPECT_EQ(cfg.out_dir, "runs");
  EXPECT_TRUE(cfg.plots);
  EXPECT_EQ(cfg.metric, "traj_error");

  std::string echo = pl::effective_config_json(cfg);
  pl::RunConfig cfg2;
  pl::apply_config_json(cfg2, pl::njson::parse(echo));
  EXPECT_EQ(pl::effective_config_json(cfg2), echo);
}

TEST(Config, RejectsUnknownKeysAndBadTypes) {
  pl::RunConfig cfg;
  EXPECT_THROW(pl::apply_config_json(cfg, pl::njson::parse(R"({"sytem":"rb"})")),
               pl::ConfigError);
  EXPECT_THROW(pl::apply_config_json(cfg, pl::njson::parse(R"({"dt":"fast"})")),
               pl::ConfigError);
  EXPECT_THROW(pl::apply_config_json(cfg, pl::njson::parse(R"({"seed":-1})")),
               pl::ConfigError);
  EXPECT_THROW(pl::apply_config_json(cfg, pl::njson::parse(R"({"flavor":"xx"})")),
               pl::ConfigError);
  EXPECT_THROW(pl::apply_config_json(cfg, pl::njson::parse(R"([1,2])")), pl::ConfigError);
}

TEST(Config, ConfigFileLoadReportsMissingOrInvalid) {
  pl::RunConfig cfg;
  EXPECT_THROW(pl::apply_config_file(cfg, "/nonexistent/config.json"), pl::ConfigError);
  auto dir = std::filesystem::temp_directory_path() / "poislearn_cfg_test";
  std::filesystem::create_directories(dir);
  auto bad = dir / "bad.json";
  pl::write_file(bad, "{not json");
  EXPECT_THROW(pl::apply_config_file(cfg, bad.string()), pl::ConfigError);
  auto good = dir / "good.json";
  pl::write_file(good, R"({"system":"sh","hidden":4})");
  pl::apply_config_file(cfg, good.string());
  EXPECT_EQ(cfg.train.system, pl::SystemName::Sh);
  EXPECT_EQ(cfg.train.hidden, 4);
  std::filesystem::remove_all(dir);
}

TEST(Config, RunDirFollowsLayout) {
  pl::RunConfig cfg;
  cfg.out_dir = "out";
  cfg.train.system = pl::SystemName::RB;
  cfg.train.flavor = pl::Flavor::IJ;
  cfg.train.seed = 5;
  EXPECT_EQ(pl::run_dir(cfg).string(), "out/rb/ij/5");
}

TEST(Config, ManifestEmbedsEchoAndHashes) {
  pl::RunConfig cfg;
  std::string m = pl::manifest_json("train", cfg, {{"checkpoint.json", "aa"}, {"losses.csv", "bb"}});
  EXPECT_NE(m.find("\"command\": \"train\""), std::string::npos);
  EXPECT_NE(m.find(pl::effective_config_json(cfg)), std::string::npos);
  EXPECT_NE(m.find("\"checkpoint.json\": \"aa\""), std::string::npos);
  EXPECT_NE(m.find("\"losses.csv\": \"bb\""), std::string::npos);
  auto parsed = pl::njson::parse(m);
  EXPECT_EQ(parsed.at("artifacts").size(), 2u);
}
