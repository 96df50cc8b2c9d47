// Integration tests for the accelcal CLI: subcommand surfaces, exit codes,
// manifests, and the refusal/override rules. Each test drives the real
// binary through the shell.

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "accelcal/dataset.hpp"
#include "accelcal/signal_model.hpp"

#ifndef ACCELCAL_CLI
#define ACCELCAL_CLI "accelcal"
#endif

using namespace accelcal;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = ACCELCAL_CLI;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "accelcal_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Cli, HelpExistsForEverySubcommand) {
  EXPECT_EQ(run("--help"), 0);
  for (const char* sub :
       {"simulate", "ingest", "label", "train", "calibrate", "evaluate", "report"}) {
    EXPECT_EQ(run(std::string(sub) + " --help"), 0) << sub;
  }
}

TEST(Cli, UnknownFlagsFailFast) {
  EXPECT_NE(run("simulate --no-such-flag"), 0);
  EXPECT_NE(run("frobnicate"), 0);
  EXPECT_NE(run(""), 0);  // a subcommand is required
}

TEST(Cli, SimulateIsDeterministicAndOverridable) {
  const fs::path dir = fresh_dir("simulate");
  ASSERT_EQ(run("--quiet --seed 7 simulate --preset rotated --recordings 6 --out " +
                (dir / "a").string()),
            0);
  ASSERT_EQ(run("--quiet --seed 7 simulate --preset rotated --recordings 6 --out " +
                (dir / "b").string()),
            0);
  EXPECT_EQ(slurp(dir / "a" / "manifest.json"), slurp(dir / "b" / "manifest.json"));
  EXPECT_EQ(slurp(dir / "a" / "rec0003.csv"), slurp(dir / "b" / "rec0003.csv"));

  // --recordings override controls the file count.
  std::size_t csvs = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    if (e.path().extension() == ".csv") ++csvs;
  }
  EXPECT_EQ(csvs, 6u);

  // Existing non-empty output is refused without --force.
  EXPECT_EQ(run("--quiet --seed 7 simulate --preset rotated --recordings 6 --out " +
                (dir / "a").string()),
            1);
  EXPECT_EQ(run("--quiet --seed 7 simulate --preset rotated --recordings 6 --force --out " +
                (dir / "a").string()),
            0);
}

TEST(Cli, ConfigFileOverridesAndRejectsUnknownKeys) {
  const fs::path dir = fresh_dir("config");
  {
    std::ofstream f(dir / "good.json");
    f << "{\"recordings\": 3, \"sigma\": 0.01}\n";
  }
  ASSERT_EQ(run("--quiet --config " + (dir / "good.json").string() +
                " --seed 1 simulate --preset rotated --out " + (dir / "ds").string()),
            0);
  std::size_t csvs = 0;
  for (const auto& e : fs::directory_iterator(dir / "ds")) {
    if (e.path().extension() == ".csv") ++csvs;
  }
  EXPECT_EQ(csvs, 3u);
  const json manifest = json::parse(slurp(dir / "ds" / "manifest.json"));
  EXPECT_DOUBLE_EQ(manifest["config"]["config"]["sigma"].get<double>(), 0.01);

  {
    std::ofstream f(dir / "bad.json");
    f << "{\"recordingz\": 3}\n";
  }
  EXPECT_EQ(run("--quiet --config " + (dir / "bad.json").string() +
                " --seed 1 simulate --preset rotated --out " + (dir / "ds2").string()),
            1);
}

TEST(Cli, LabelMatchesManifestTruth) {
  const fs::path dir = fresh_dir("label");
  ASSERT_EQ(run("--quiet --seed 3 simulate --preset rotated --recordings 3 --out " +
                (dir / "ds").string()),
            0);
  ASSERT_EQ(run("--quiet label --dataset " + (dir / "ds").string() +
                " --convergence-report " + (dir / "conv.csv").string()),
            0);

  const auto [recordings, manifest] = load_dataset(dir / "ds");
  for (const auto& rec : recordings) {
    ASSERT_TRUE(rec.label_bias.has_value());
    ASSERT_TRUE(rec.true_bias.has_value());
    // sigma = 0.02 over 7500 samples: 5-sigma statistical band per axis.
    const double tol = 5.0 * 0.02 / std::sqrt(7500.0);
    EXPECT_NEAR(rec.label_bias->x, rec.true_bias->x, tol);
    EXPECT_NEAR(rec.label_bias->y, rec.true_bias->y, tol);
    EXPECT_NEAR(rec.label_bias->z, rec.true_bias->z, tol);
  }
  EXPECT_TRUE(fs::exists(dir / "conv.csv"));
  std::ifstream conv(dir / "conv.csv");
  std::string header;
  std::getline(conv, header);
  EXPECT_EQ(header, "recording,axis,converged,converged_at_sample");
}

TEST(Cli, CalibrateExitCodes) {
  const fs::path dir = fresh_dir("calibrate");
  // Six noiseless poses exported as recording CSVs.
  const BiasVector truth{0.08, -0.12, 0.05};
  const std::vector<OrientationAngles> poses{{0.0, 0.0, 0.0},  {0.0, 1.2, 0.0},
                                             {0.0, -1.1, 0.0}, {1.3, 0.0, 0.0},
                                             {-1.2, 0.2, 0.0}, {2.8, -0.5, 0.0}};
  std::string inputs;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const SignalSegment seg = simulate_segment(poses[i], truth, {0.0, 0}, 100, 150.0);
    const fs::path p = dir / ("pose" + std::to_string(i) + ".csv");
    export_csv(seg, p);
    inputs += " --input " + p.string();
  }

  // Multi-pose LS recovers the injected bias; exit 0.
  ASSERT_EQ(run("calibrate --method ls --out " + (dir / "ls.json").string() + " --quiet" +
                inputs),
            0);
  const json ls = json::parse(slurp(dir / "ls.json"));
  EXPECT_NEAR(ls["bias_mps2"][0].get<double>(), truth.x, 1e-8);
  EXPECT_NEAR(ls["bias_mps2"][1].get<double>(), truth.y, 1e-8);
  EXPECT_NEAR(ls["bias_mps2"][2].get<double>(), truth.z, 1e-8);
  EXPECT_TRUE(ls["diagnostics"]["converged"].get<bool>());

  // Single-pose iterative: rank-deficient, exit 2.
  EXPECT_EQ(run("--quiet calibrate --method iterative --input " +
                (dir / "pose0.csv").string()),
            2);

  // ofbenet without a model: usage error, exit 1.
  EXPECT_EQ(run("--quiet calibrate --method ofbenet --input " + (dir / "pose0.csv").string()),
            1);
}

TEST(Cli, TrainEvaluateReportRoundTrip) {
  const fs::path dir = fresh_dir("pipeline");
  ASSERT_EQ(run("--quiet --seed 17 simulate --preset rotated --recordings 12 --out " +
                (dir / "ds").string()),
            0);
  ASSERT_EQ(run("--quiet label --dataset " + (dir / "ds").string()), 0);
  ASSERT_EQ(run("--quiet --seed 17 train --dataset " + (dir / "ds").string() + " --out " +
                (dir / "run").string() + " --max-epochs 2"),
            0);
  EXPECT_TRUE(fs::exists(dir / "run" / "model.ofbe"));
  EXPECT_TRUE(fs::exists(dir / "run" / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "run" / "training_log.csv"));

  // ofbenet inference through the CLI with the trained model; a 20 s window
  // must calibrate in well under a second even with process startup.
  const auto t0 = std::chrono::steady_clock::now();
  ASSERT_EQ(run("--quiet calibrate --method ofbenet --model " +
                (dir / "run" / "model.ofbe").string() + " --input " +
                (dir / "ds" / "rec0000.csv").string() + " --out " +
                (dir / "pred.json").string()),
            0);
  const double calibrate_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(calibrate_seconds, 1.0);
  const json pred = json::parse(slurp(dir / "pred.json"));
  EXPECT_EQ(pred["bias_mps2"].size(), 3u);

  ASSERT_EQ(run("--quiet --seed 17 evaluate --dataset " + (dir / "ds").string() + " --out " +
                (dir / "eval").string() + " --folds 3 --test-fraction 0.1 --max-epochs 2"),
            0);
  ASSERT_TRUE(fs::exists(dir / "eval" / "report.json"));
  const std::string original = slurp(dir / "eval" / "report.json");

  // `report` regenerates the exact same bytes from the persisted folds.
  ASSERT_EQ(run("--quiet report --results " + (dir / "eval").string()), 0);
  EXPECT_EQ(slurp(dir / "eval" / "report.json"), original);

  const json report = json::parse(original);
  EXPECT_EQ(report["methods"].size(), 3u);
  for (const auto& pair : report["pairs"]) {
    if (!pair["degenerate"].get<bool>()) {
      EXPECT_EQ(pair["dof"].get<int>(), 2);
    }
  }
}
