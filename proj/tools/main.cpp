// accelcal: stationary accelerometer bias calibration toolkit.
//
// Subcommands: simulate | ingest | label | train | calibrate | evaluate |
// report. Exit codes: 0 success, 1 usage or I/O error, 2 algorithmic
// non-convergence (solver did not converge or geometry is rank-deficient).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "accelcal/calib_iterative.hpp"
#include "accelcal/calib_ls.hpp"
#include "accelcal/dataset.hpp"
#include "accelcal/errors.hpp"
#include "accelcal/evaluation.hpp"
#include "accelcal/ofbenet.hpp"
#include "accelcal/rng.hpp"
#include "accelcal/signal_model.hpp"
#include "accelcal/training.hpp"
#include "accelcal/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace accelcal;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNotConverged = 2;

constexpr double kDegToRad = std::numbers::pi / 180.0;

/// Every tunable the toolkit exposes, with its default. A JSON config file
/// (--config) overrides defaults, and explicit command-line flags override
/// the config file. Unknown config keys are rejected.
struct Settings {
  std::uint64_t seed = 0;
  double g = kStandardGravity;
  double sigma = 0.02;
  std::size_t window_len = 3000;

  // synthesis
  std::size_t recordings = 0;  // 0: preset default
  std::size_t devices = 0;     // 0: preset default
  double duration_s = 80.0;
  double sample_rate_hz = 150.0;
  double bias_range = 0.196;
  double turn_on_sigma = 0.01;
  std::string bias_mode = "device-anchored";  // or "per-power-cycle"

  // labeling
  std::size_t label_skip = kLabelSkipSamples;
  double convergence_threshold = 5e-6;
  std::size_t convergence_window = 40;

  // network
  std::size_t pool_size = 4;
  std::size_t dense_width = 32;
  double dropout_keep = 0.8;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.9;

  // training
  double learning_rate = 0.01;
  std::size_t batch_size = 8;
  double lr_factor = 0.2;
  std::size_t lr_patience = 15;
  std::size_t early_stop_patience = 5;
  std::size_t max_epochs = 300;
  double improvement_threshold = 1e-4;
  bool strict_paper_schedule = false;
  double val_fraction = 0.15;

  // solvers
  double trf_initial_radius = 0.1;
  double trf_tol_gradient = 1e-10;
  double trf_tol_step = 1e-12;
  std::size_t trf_max_iterations = 200;
  double iterative_tolerance = 1e-9;
  std::size_t iterative_max_iterations = 100;

  // evaluation
  std::size_t folds = 5;
  double test_fraction = 0.2;
};

json settings_to_json(const Settings& s) {
  json j;
  j["seed"] = s.seed;
  j["g"] = s.g;
  j["sigma"] = s.sigma;
  j["window_len"] = s.window_len;
  j["recordings"] = s.recordings;
  j["devices"] = s.devices;
  j["duration_s"] = s.duration_s;
  j["sample_rate_hz"] = s.sample_rate_hz;
  j["bias_range"] = s.bias_range;
  j["turn_on_sigma"] = s.turn_on_sigma;
  j["bias_mode"] = s.bias_mode;
  j["label_skip"] = s.label_skip;
  j["convergence_threshold"] = s.convergence_threshold;
  j["convergence_window"] = s.convergence_window;
  j["pool_size"] = s.pool_size;
  j["dense_width"] = s.dense_width;
  j["dropout_keep"] = s.dropout_keep;
  j["bn_epsilon"] = s.bn_epsilon;
  j["bn_momentum"] = s.bn_momentum;
  j["learning_rate"] = s.learning_rate;
  j["batch_size"] = s.batch_size;
  j["lr_factor"] = s.lr_factor;
  j["lr_patience"] = s.lr_patience;
  j["early_stop_patience"] = s.early_stop_patience;
  j["max_epochs"] = s.max_epochs;
  j["improvement_threshold"] = s.improvement_threshold;
  j["strict_paper_schedule"] = s.strict_paper_schedule;
  j["val_fraction"] = s.val_fraction;
  j["trf_initial_radius"] = s.trf_initial_radius;
  j["trf_tol_gradient"] = s.trf_tol_gradient;
  j["trf_tol_step"] = s.trf_tol_step;
  j["trf_max_iterations"] = s.trf_max_iterations;
  j["iterative_tolerance"] = s.iterative_tolerance;
  j["iterative_max_iterations"] = s.iterative_max_iterations;
  j["folds"] = s.folds;
  j["test_fraction"] = s.test_fraction;
  return j;
}

void apply_config_file(const fs::path& path, Settings& s) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CLI::ValidationError("--config", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw CLI::ValidationError("--config", e.what());
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") s.seed = value.get<std::uint64_t>();
    else if (key == "g") s.g = value.get<double>();
    else if (key == "sigma") s.sigma = value.get<double>();
    else if (key == "window_len") s.window_len = value.get<std::size_t>();
    else if (key == "recordings") s.recordings = value.get<std::size_t>();
    else if (key == "devices") s.devices = value.get<std::size_t>();
    else if (key == "duration_s") s.duration_s = value.get<double>();
    else if (key == "sample_rate_hz") s.sample_rate_hz = value.get<double>();
    else if (key == "bias_range") s.bias_range = value.get<double>();
    else if (key == "turn_on_sigma") s.turn_on_sigma = value.get<double>();
    else if (key == "bias_mode") s.bias_mode = value.get<std::string>();
    else if (key == "label_skip") s.label_skip = value.get<std::size_t>();
    else if (key == "convergence_threshold") s.convergence_threshold = value.get<double>();
    else if (key == "convergence_window") s.convergence_window = value.get<std::size_t>();
    else if (key == "pool_size") s.pool_size = value.get<std::size_t>();
    else if (key == "dense_width") s.dense_width = value.get<std::size_t>();
    else if (key == "dropout_keep") s.dropout_keep = value.get<double>();
    else if (key == "bn_epsilon") s.bn_epsilon = value.get<double>();
    else if (key == "bn_momentum") s.bn_momentum = value.get<double>();
    else if (key == "learning_rate") s.learning_rate = value.get<double>();
    else if (key == "batch_size") s.batch_size = value.get<std::size_t>();
    else if (key == "lr_factor") s.lr_factor = value.get<double>();
    else if (key == "lr_patience") s.lr_patience = value.get<std::size_t>();
    else if (key == "early_stop_patience") s.early_stop_patience = value.get<std::size_t>();
    else if (key == "max_epochs") s.max_epochs = value.get<std::size_t>();
    else if (key == "improvement_threshold") s.improvement_threshold = value.get<double>();
    else if (key == "strict_paper_schedule") s.strict_paper_schedule = value.get<bool>();
    else if (key == "val_fraction") s.val_fraction = value.get<double>();
    else if (key == "trf_initial_radius") s.trf_initial_radius = value.get<double>();
    else if (key == "trf_tol_gradient") s.trf_tol_gradient = value.get<double>();
    else if (key == "trf_tol_step") s.trf_tol_step = value.get<double>();
    else if (key == "trf_max_iterations") s.trf_max_iterations = value.get<std::size_t>();
    else if (key == "iterative_tolerance") s.iterative_tolerance = value.get<double>();
    else if (key == "iterative_max_iterations")
      s.iterative_max_iterations = value.get<std::size_t>();
    else if (key == "folds") s.folds = value.get<std::size_t>();
    else if (key == "test_fraction") s.test_fraction = value.get<double>();
    else throw CLI::ValidationError("--config", "unknown key '" + key + "'");
  }
}

NetworkConfig network_config(const Settings& s) {
  NetworkConfig cfg;
  cfg.pool_size = s.pool_size;
  cfg.dense_width = s.dense_width;
  cfg.dropout_keep = s.dropout_keep;
  cfg.bn_epsilon = s.bn_epsilon;
  cfg.bn_momentum = s.bn_momentum;
  return cfg;
}

TrainingConfig training_config(const Settings& s) {
  TrainingConfig cfg;
  cfg.learning_rate = s.learning_rate;
  cfg.batch_size = s.batch_size;
  cfg.lr_factor = s.lr_factor;
  cfg.lr_patience = s.lr_patience;
  cfg.early_stop_patience = s.early_stop_patience;
  cfg.max_epochs = s.max_epochs;
  cfg.improvement_rel_threshold = s.improvement_threshold;
  cfg.strict_schedule = s.strict_paper_schedule;
  return cfg;
}

TrustRegionConfig trf_config(const Settings& s) {
  TrustRegionConfig cfg;
  cfg.initial_radius = s.trf_initial_radius;
  cfg.tol_gradient = s.trf_tol_gradient;
  cfg.tol_step = s.trf_tol_step;
  cfg.max_iterations = s.trf_max_iterations;
  return cfg;
}

void write_json_file(const json& j, const fs::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << j.dump(2) << '\n';
  if (!f) throw Error("write failed for " + path.string());
}

/// Run manifest shared by every artifact-producing command.
json run_manifest(const std::string& command, const Settings& s) {
  json j;
  j["schema_version"] = 1;
  j["tool"] = "accelcal";
  j["version"] = kVersion;
  j["revision"] = kGitRevision;
  j["command"] = command;
  j["seed"] = s.seed;
  j["config"] = settings_to_json(s);
  return j;
}

void ensure_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) {
      throw Error("output path " + dir.string() + " exists and is not empty (use --force)");
    }
  }
  fs::create_directories(dir);
}

Vec3 parse_triple(const std::string& text, const char* flag) {
  Vec3 v{};
  const int n = std::sscanf(text.c_str(), "%lf,%lf,%lf", &v.x, &v.y, &v.z);
  if (n != 3) throw CLI::ValidationError(flag, "expected three comma-separated numbers");
  return v;
}

json bias_to_json(const Vec3& b) { return json::array({b.x, b.y, b.z}); }

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const Settings& s, const std::string& preset, const fs::path& out,
                 bool force, bool quiet) {
  SynthesisConfig cfg;
  if (preset == "gravity-aligned") {
    cfg = gravity_aligned_config(s.seed);
  } else if (preset == "rotated") {
    cfg = rotated_config(s.seed);
  } else {
    throw CLI::ValidationError("--preset", "expected 'gravity-aligned' or 'rotated'");
  }
  if (s.devices > 0) cfg.devices = s.devices;
  if (s.recordings > 0) cfg.recordings_per_device = s.recordings;
  cfg.duration_s = s.duration_s;
  cfg.sample_rate_hz = s.sample_rate_hz;
  cfg.sigma = s.sigma;
  cfg.g = s.g;
  cfg.bias_range = s.bias_range;
  cfg.turn_on_sigma = s.turn_on_sigma;
  if (s.bias_mode == "device-anchored") {
    cfg.bias_mode = BiasMode::kDeviceAnchored;
  } else if (s.bias_mode == "per-power-cycle") {
    cfg.bias_mode = BiasMode::kPerPowerCycle;
  } else {
    throw CLI::ValidationError("--bias-mode",
                               "expected 'device-anchored' or 'per-power-cycle'");
  }

  ensure_output_dir(out, force);
  const auto recordings = generate_dataset(cfg);

  DatasetManifest manifest;
  manifest.preset = preset;
  manifest.sample_rate_hz = cfg.sample_rate_hz;
  manifest.g = cfg.g;
  manifest.root_seed = s.seed;
  json cfg_echo = run_manifest("simulate", s);
  cfg_echo["preset"] = preset;
  manifest.config_json = cfg_echo.dump();
  save_dataset(recordings, manifest, out);

  if (!quiet) {
    const double hours = static_cast<double>(recordings.size()) *
                         static_cast<double>(recordings.front().segment.size()) /
                         cfg.sample_rate_hz / 3600.0;
    std::printf("wrote %zu recordings (%.2f h) to %s\n", recordings.size(), hours,
                out.string().c_str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

int cmd_ingest(const Settings& s, const std::vector<std::string>& files, const fs::path& out,
               bool force, bool quiet) {
  if (files.empty()) throw CLI::ValidationError("files", "no input CSV files given");
  ensure_output_dir(out, force);

  std::vector<Recording> recordings;
  for (const auto& file : files) {
    Recording rec = ingest_csv(file, s.sample_rate_hz);
    fs::copy_file(file, out / (rec.id + ".csv"), fs::copy_options::overwrite_existing);
    recordings.push_back(std::move(rec));
  }

  DatasetManifest manifest;
  manifest.preset = "ingested";
  manifest.sample_rate_hz = s.sample_rate_hz;
  manifest.g = s.g;
  manifest.root_seed = s.seed;
  manifest.config_json = run_manifest("ingest", s).dump();
  update_manifest(recordings, manifest, out);
  if (!quiet) {
    std::printf("ingested %zu recordings into %s\n", recordings.size(), out.string().c_str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// label
// ---------------------------------------------------------------------------

int cmd_label(const Settings& s, const fs::path& dataset_dir,
              const std::string& orientation_deg, const std::string& reference_gravity,
              const fs::path& convergence_csv, bool quiet) {
  auto [recordings, manifest] = load_dataset(dataset_dir);

  std::optional<OrientationAngles> override_orientation;
  if (!orientation_deg.empty()) {
    const Vec3 deg = parse_triple(orientation_deg, "--orientation-deg");
    override_orientation =
        OrientationAngles{deg.x * kDegToRad, deg.y * kDegToRad, deg.z * kDegToRad};
  }
  std::optional<Vec3> reference;
  if (!reference_gravity.empty()) {
    reference = parse_triple(reference_gravity, "--reference-gravity");
  }

  for (Recording& rec : recordings) {
    if (reference) {
      // Align with the reference gravity direction, then label as leveled.
      Recording aligned = rec;
      aligned.segment = align_by_reference(rec.segment, *reference);
      rec.label_bias = label_bias(aligned, {0.0, 0.0, 0.0}, s.g, s.label_skip);
    } else if (override_orientation) {
      rec.label_bias = label_bias(rec, *override_orientation, s.g, s.label_skip);
    } else if (rec.true_orientation) {
      rec.label_bias = label_bias(rec, *rec.true_orientation, s.g, s.label_skip);
    } else {
      throw Error("recording '" + rec.id +
                  "' has no orientation; pass --orientation-deg or --reference-gravity");
    }
  }

  if (!convergence_csv.empty()) {
    std::ofstream f(convergence_csv, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + convergence_csv.string());
    f << "recording,axis,converged,converged_at_sample\n";
    for (const Recording& rec : recordings) {
      for (std::size_t axis = 0; axis < 3; ++axis) {
        const ConvergenceResult r = detect_convergence(
            rec.segment, axis, s.convergence_threshold, s.convergence_window);
        f << rec.id << ',' << "xyz"[axis] << ',' << (r.converged ? 1 : 0) << ','
          << (r.converged ? r.converged_at_sample : 0) << '\n';
      }
    }
  }

  update_manifest(recordings, manifest, dataset_dir);
  if (!quiet) std::printf("labeled %zu recordings\n", recordings.size());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const Settings& s, const fs::path& dataset_dir, const fs::path& out, bool force,
              bool quiet) {
  ensure_output_dir(out, force);
  auto [recordings, manifest] = load_dataset(dataset_dir);
  for (const Recording& rec : recordings) {
    if (!rec.label_bias) {
      throw Error("recording '" + rec.id + "' is unlabeled; run `accelcal label` first");
    }
  }

  // Validation split at recording granularity.
  std::vector<std::size_t> order(recordings.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SplitMix64 rng(derive_seed(s.seed, "train-val-split"));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.next_below(i)]);
  }
  const std::size_t val_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(
             static_cast<double>(recordings.size()) * s.val_fraction)));
  if (val_count >= recordings.size()) {
    throw Error("dataset too small for a validation split");
  }

  std::vector<WindowedExample> train_set, val_set;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto windows = window_recording(recordings[order[i]], s.window_len);
    auto& dst = i < val_count ? val_set : train_set;
    dst.insert(dst.end(), std::make_move_iterator(windows.begin()),
               std::make_move_iterator(windows.end()));
  }
  if (train_set.empty() || val_set.empty()) {
    throw Error("not enough windows to train (check window_len vs recording length)");
  }

  TrainingConfig tc = training_config(s);
  tc.seed = derive_seed(s.seed, "train-run");
  tc.checkpoint_path = out / "model.ofbe";
  const NetworkParameters init =
      init_parameters(network_config(s), derive_seed(s.seed, "train-init"));

  const TrainResult result = train(init, train_set, val_set, tc);
  save_model(result.params, out / "model.ofbe");
  write_training_log_csv(result.log, out / "training_log.csv");
  write_training_summary_json(result.log, out / "training_summary.json");

  json manifest_json = run_manifest("train", s);
  manifest_json["dataset"] = dataset_dir.string();
  manifest_json["model_file"] = "model.ofbe";
  manifest_json["train_windows"] = train_set.size();
  manifest_json["val_windows"] = val_set.size();
  manifest_json["best_epoch"] = result.log.best_epoch;
  manifest_json["best_val_loss"] = result.log.best_val_loss;
  write_json_file(manifest_json, out / "manifest.json");

  if (!quiet) {
    std::printf("trained %zu epochs (best %zu, val loss %.3g); model at %s\n",
                result.log.stopped_epoch, result.log.best_epoch, result.log.best_val_loss,
                (out / "model.ofbe").string().c_str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

int cmd_calibrate(const Settings& s, const std::string& method,
                  const std::vector<std::string>& inputs, const fs::path& model_path,
                  bool per_sample, const fs::path& out, bool quiet) {
  if (inputs.empty()) throw CLI::ValidationError("--input", "no input recordings");

  std::vector<Recording> recs;
  for (const auto& file : inputs) recs.push_back(ingest_csv(file, s.sample_rate_hz));

  json result;
  result["method"] = method;
  result["version"] = kVersion;
  int exit_code = kExitOk;

  if (method == "ofbenet") {
    if (model_path.empty()) {
      throw CLI::ValidationError("--model", "ofbenet calibration needs a model file");
    }
    if (recs.size() != 1) {
      throw CLI::ValidationError("--input", "ofbenet calibration takes exactly one recording");
    }
    const NetworkParameters params = load_model(model_path);
    const Recording& rec = recs[0];
    if (rec.segment.size() < s.window_len) {
      throw Error("recording shorter than the inference window (" +
                  std::to_string(s.window_len) + " samples)");
    }
    Tensor2 window(s.window_len, 3);
    for (std::size_t i = 0; i < s.window_len; ++i) {
      window(i, 0) = rec.segment.samples[i].x;
      window(i, 1) = rec.segment.samples[i].y;
      window(i, 2) = rec.segment.samples[i].z;
    }
    const BiasPrediction pred = forward(params, window);
    result["bias_mps2"] = bias_to_json(pred.bhat);
    result["diagnostics"] = {{"model", model_path.string()},
                             {"window_samples", s.window_len}};
  } else {
    // Model-based methods: one pose per input file (pose means) by default,
    // or every sample pooled with --per-sample.
    std::vector<Vec3> measurements;
    if (per_sample) {
      for (const Recording& rec : recs) {
        measurements.insert(measurements.end(), rec.segment.samples.begin(),
                            rec.segment.samples.end());
      }
    } else {
      std::vector<std::vector<Vec3>> poses;
      for (const Recording& rec : recs) poses.push_back(rec.segment.samples);
      measurements = make_pose_mean_problem(poses, s.g).measurements;
    }

    if (method == "ls") {
      const CalibrationResult r = solve_trf({measurements, s.g}, trf_config(s));
      result["bias_mps2"] = bias_to_json(r.bias);
      result["diagnostics"] = {{"iterations", r.iterations},
                               {"final_cost", r.final_cost},
                               {"converged", r.converged}};
      if (!r.converged) exit_code = kExitNotConverged;
    } else if (method == "iterative") {
      IterativeConfig ic;
      ic.tolerance = s.iterative_tolerance;
      ic.max_iterations = s.iterative_max_iterations;
      try {
        const CalibrationResult r = solve_iterative(measurements, ic, s.g);
        result["bias_mps2"] = bias_to_json(r.bias);
        result["diagnostics"] = {{"iterations", r.iterations},
                                 {"final_cost", r.final_cost},
                                 {"converged", r.converged}};
        if (!r.converged) exit_code = kExitNotConverged;
      } catch (const RankDeficientError& e) {
        std::fprintf(stderr, "calibrate: %s\n", e.what());
        result["error"] = e.what();
        result["diagnostics"] = {{"rank", e.rank()}};
        exit_code = kExitNotConverged;
      }
    } else {
      throw CLI::ValidationError("--method", "expected 'ls', 'iterative', or 'ofbenet'");
    }
  }

  const std::string text = result.dump(2);
  if (!quiet) std::printf("%s\n", text.c_str());
  if (!out.empty()) {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    f << text << '\n';
    if (!f) throw Error("cannot write " + out.string());
  }
  return exit_code;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int cmd_evaluate(const Settings& s, const fs::path& dataset_dir, const fs::path& out,
                 const std::string& methods_csv, bool pooled, bool per_sample_baselines,
                 bool sequential, bool force, bool quiet) {
  ensure_output_dir(out, force);
  auto [recordings, manifest] = load_dataset(dataset_dir);

  EvaluationConfig ec;
  ec.folds = s.folds;
  ec.test_fraction = s.test_fraction;
  ec.window_len = s.window_len;
  ec.val_fraction = s.val_fraction;
  ec.seed = s.seed;
  ec.g = s.g;
  ec.network = network_config(s);
  ec.training = training_config(s);
  ec.pool_test_orientations = pooled;
  ec.per_sample_baselines = per_sample_baselines;
  ec.parallel_folds = !sequential;
  ec.dataset_label = manifest.preset.empty() ? "dataset" : manifest.preset;

  ec.methods.clear();
  std::string token;
  std::istringstream stream(methods_csv);
  while (std::getline(stream, token, ',')) {
    if (!token.empty()) ec.methods.push_back(method_from_name(token));
  }
  if (ec.methods.empty()) throw CLI::ValidationError("--methods", "no methods selected");

  const EvaluationReport report = run_cross_validation(recordings, ec);

  json config_json = run_manifest("evaluate", s);
  config_json["dataset"] = dataset_dir.string();
  config_json["dataset_label"] = ec.dataset_label;
  config_json["methods"] = methods_csv;
  config_json["pooled"] = pooled;
  config_json["per_sample_baselines"] = per_sample_baselines;
  write_json_file(config_json, out / "eval_config.json");

  write_report_json(report, out / "report.json");
  write_fold_results_json(report, out);
  write_figure_csvs(report, out);

  for (const auto& m : report.methods) {
    for (std::size_t fold : m.failed_folds) {
      std::fprintf(stderr, "warning: method %s failed on fold %zu (excluded)\n",
                   m.method.c_str(), fold);
    }
  }
  if (!quiet) {
    for (const auto& m : report.methods) {
      std::printf("%-14s mean RMSE %.4f m/s^2 (std %.4f, max err %.4f)\n", m.method.c_str(),
                  m.mean_rmse, m.std_rmse, m.max_error);
    }
    for (const auto& p : report.pairs) {
      if (p.degenerate) {
        std::printf("%s vs %s: identical per-fold errors (degenerate t-test)\n",
                    p.method_a.c_str(), p.method_b.c_str());
      } else {
        std::printf("%s vs %s: t=%.3f p=%.4g dof=%zu improvement=%.1f%%\n",
                    p.method_a.c_str(), p.method_b.c_str(), p.t, p.p, p.dof,
                    p.improvement_percent);
      }
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const fs::path& results_dir, const fs::path& out, bool quiet) {
  std::string label = "dataset";
  const fs::path config_path = results_dir / "eval_config.json";
  if (fs::exists(config_path)) {
    std::ifstream f(config_path, std::ios::binary);
    const json j = json::parse(f);
    label = j.value("dataset_label", label);
  }
  const auto results = read_fold_results_json(results_dir);
  const EvaluationReport report = aggregate_report(results, label);
  const fs::path target = out.empty() ? results_dir / "report.json" : out;
  write_report_json(report, target);
  write_figure_csvs(report, out.empty() ? results_dir : target.parent_path());
  if (!quiet) std::printf("wrote %s\n", target.string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"accelcal: stationary accelerometer bias calibration toolkit"};
  app.require_subcommand(1);
  // Let global flags (--seed, --quiet, --config) appear after the
  // subcommand as well.
  app.fallthrough();

  Settings settings;
  std::string config_file;
  bool quiet = false;
  bool force = false;

  app.add_option("--config", config_file, "JSON config file overriding defaults")
      ->expected(1);
  app.add_option("--seed", settings.seed, "root seed for all derived randomness");
  app.add_flag("--quiet", quiet, "suppress informational output");

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--g", settings.g, "gravity magnitude, m/s^2");
    cmd->add_option("--window", settings.window_len, "window length in samples");
    cmd->add_option("--rate", settings.sample_rate_hz, "sample rate, Hz");
  };

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  std::string preset = "gravity-aligned";
  fs::path sim_out = "dataset";
  sim->add_option("--preset", preset, "gravity-aligned | rotated");
  sim->add_option("--out", sim_out, "output dataset directory");
  sim->add_flag("--force", force, "overwrite existing output");
  sim->add_option("--recordings", settings.recordings, "recordings per device (0 = preset)");
  sim->add_option("--devices", settings.devices, "virtual devices (0 = preset)");
  sim->add_option("--sigma", settings.sigma, "noise standard deviation, m/s^2");
  sim->add_option("--duration", settings.duration_s, "recording duration, s");
  sim->add_option("--bias-range", settings.bias_range, "device offset span, m/s^2");
  sim->add_option("--turn-on-sigma", settings.turn_on_sigma, "per-cycle jitter, m/s^2");
  sim->add_option("--bias-mode", settings.bias_mode, "device-anchored | per-power-cycle");
  add_common(sim);

  // ingest
  auto* ing = app.add_subcommand("ingest", "validate and register recording CSVs");
  std::vector<std::string> ingest_files;
  fs::path ingest_out = "dataset";
  ing->add_option("files", ingest_files, "recording CSV files");
  ing->add_option("--out", ingest_out, "output dataset directory");
  ing->add_flag("--force", force, "overwrite existing output");
  add_common(ing);

  // label
  auto* lab = app.add_subcommand("label", "compute ground-truth bias labels");
  fs::path label_dataset;
  std::string orientation_deg, reference_gravity;
  fs::path convergence_csv;
  lab->add_option("--dataset", label_dataset, "dataset directory")->required();
  lab->add_option("--orientation-deg", orientation_deg,
                  "override roll,pitch,yaw in degrees for every recording");
  lab->add_option("--reference-gravity", reference_gravity,
                  "unit gravity direction x,y,z; recordings are aligned before labeling");
  lab->add_option("--skip", settings.label_skip, "warm-up samples excluded from the label");
  lab->add_option("--convergence-report", convergence_csv,
                  "also write a per-recording convergence CSV");
  lab->add_option("--convergence-threshold", settings.convergence_threshold,
                  "running-mean derivative threshold, m/s^2");
  add_common(lab);

  // train
  auto* tr = app.add_subcommand("train", "train the bias regressor");
  fs::path train_dataset, train_out = "run";
  tr->add_option("--dataset", train_dataset, "labeled dataset directory")->required();
  tr->add_option("--out", train_out, "output directory");
  tr->add_flag("--force", force, "overwrite existing output");
  tr->add_option("--max-epochs", settings.max_epochs, "epoch budget");
  tr->add_option("--batch-size", settings.batch_size, "mini-batch size");
  tr->add_option("--lr", settings.learning_rate, "initial learning rate");
  tr->add_option("--lr-factor", settings.lr_factor, "plateau reduction factor");
  tr->add_option("--lr-patience", settings.lr_patience, "plateau patience, epochs");
  tr->add_option("--early-stop-patience", settings.early_stop_patience,
                 "early stopping patience, epochs");
  tr->add_flag("--strict-paper-schedule", settings.strict_paper_schedule,
               "literal schedule: early stopping may fire before any LR cut");
  tr->add_option("--val-fraction", settings.val_fraction, "validation recording fraction");
  tr->add_option("--pool", settings.pool_size, "average pooling size");
  tr->add_option("--dense-width", settings.dense_width, "dense layer width");
  tr->add_option("--dropout-keep", settings.dropout_keep, "dropout inclusion probability");
  add_common(tr);

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "estimate the bias of recordings");
  std::string method = "ls";
  std::vector<std::string> cal_inputs;
  fs::path model_path, cal_out;
  bool per_sample = false;
  cal->add_option("--method", method, "ls | iterative | ofbenet")->required();
  cal->add_option("--input", cal_inputs, "recording CSV (repeat for multiple poses)")
      ->required();
  cal->add_option("--model", model_path, "model file (ofbenet)");
  cal->add_flag("--per-sample", per_sample, "per-sample residuals instead of pose means");
  cal->add_option("--out", cal_out, "also write the result JSON here");
  cal->add_option("--trf-max-iterations", settings.trf_max_iterations, "TRF budget");
  cal->add_option("--iterative-tolerance", settings.iterative_tolerance,
                  "correction-norm stop threshold");
  add_common(cal);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "cross-validated method comparison");
  fs::path eval_dataset, eval_out = "eval";
  std::string methods_csv = "ls,iterative,ofbenet";
  bool pooled = false, per_sample_baselines = false, sequential = false;
  ev->add_option("--dataset", eval_dataset, "labeled dataset directory")->required();
  ev->add_option("--out", eval_out, "output directory");
  ev->add_flag("--force", force, "overwrite existing output");
  ev->add_option("--folds", settings.folds, "number of folds");
  ev->add_option("--test-fraction", settings.test_fraction, "held-out fraction per fold");
  ev->add_option("--methods", methods_csv, "comma-separated method list");
  ev->add_flag("--pooled", pooled, "pool test orientations per power cycle (diagnostic)");
  ev->add_flag("--per-sample-baselines", per_sample_baselines,
               "baselines on raw samples instead of pose means");
  ev->add_flag("--sequential", sequential, "evaluate folds one at a time");
  ev->add_option("--max-epochs", settings.max_epochs, "per-fold epoch budget");
  ev->add_option("--batch-size", settings.batch_size, "mini-batch size");
  ev->add_option("--lr", settings.learning_rate, "initial learning rate");
  ev->add_flag("--strict-paper-schedule", settings.strict_paper_schedule,
               "literal schedule: early stopping may fire before any LR cut");
  ev->add_option("--val-fraction", settings.val_fraction, "validation recording fraction");
  ev->add_option("--pool", settings.pool_size, "average pooling size");
  ev->add_option("--dense-width", settings.dense_width, "dense layer width");
  ev->add_option("--dropout-keep", settings.dropout_keep, "dropout inclusion probability");
  add_common(ev);

  // report
  auto* rep = app.add_subcommand("report", "regenerate report from persisted fold results");
  fs::path results_dir, report_out;
  rep->add_option("--results", results_dir, "evaluation output directory")->required();
  rep->add_option("--out", report_out, "report destination (default: results dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_file.empty()) apply_config_file(config_file, settings);

    if (sim->parsed()) return cmd_simulate(settings, preset, sim_out, force, quiet);
    if (ing->parsed()) return cmd_ingest(settings, ingest_files, ingest_out, force, quiet);
    if (lab->parsed()) {
      return cmd_label(settings, label_dataset, orientation_deg, reference_gravity,
                       convergence_csv, quiet);
    }
    if (tr->parsed()) return cmd_train(settings, train_dataset, train_out, force, quiet);
    if (cal->parsed()) {
      return cmd_calibrate(settings, method, cal_inputs, model_path, per_sample, cal_out,
                           quiet);
    }
    if (ev->parsed()) {
      return cmd_evaluate(settings, eval_dataset, eval_out, methods_csv, pooled,
                          per_sample_baselines, sequential, force, quiet);
    }
    if (rep->parsed()) return cmd_report(results_dir, report_out, quiet);
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "accelcal: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "accelcal: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
