#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "accelcal/dataset.hpp"
#include "accelcal/ofbenet.hpp"
#include "accelcal/training.hpp"

namespace accelcal {

enum class Method { kLeastSquares, kIterative, kOfbenet };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

/// Per-fold predictions of one method, kept raw so reports can be rebuilt
/// byte-for-byte from persisted files.
struct MethodResult {
  std::string method;
  std::size_t fold = 0;
  std::vector<std::string> signal_ids;
  std::vector<Vec3> predictions;
  std::vector<Vec3> truths;
  bool failed = false;
  std::string failure_reason;
  bool used_min_norm_fallback = false;
};

/// Root-mean-square error over error-vector norms, m/s^2.
double rmse(const std::vector<Vec3>& truths, const std::vector<Vec3>& predictions);

/// Worst-case deviation: max over signals and axes of the absolute
/// component error, m/s^2.
double max_error(const std::vector<Vec3>& truths, const std::vector<Vec3>& predictions);

struct PairedTTest {
  double t = 0.0;
  double p = 1.0;
  std::size_t dof = 0;
};

/// Paired two-sided t-test on per-fold scalars: t = mean(d) / (sd(d)/sqrt(N))
/// with the sample standard deviation. Throws DegenerateVarianceError when
/// the differences have zero variance (identical methods) and
/// std::invalid_argument when the inputs are unusable (N < 2 or mismatched).
PairedTTest paired_t_test(const std::vector<double>& errors_a,
                          const std::vector<double>& errors_b);

struct EvaluationConfig {
  std::size_t folds = 5;
  double test_fraction = 0.2;
  std::size_t window_len = 3000;
  double val_fraction = 0.15;  // of each fold's training recordings
  std::uint64_t seed = 0;
  double g = kStandardGravity;
  std::vector<Method> methods{Method::kLeastSquares, Method::kIterative, Method::kOfbenet};
  NetworkConfig network;
  TrainingConfig training;  // per-fold seeds are derived from `seed`
  /// Baselines see each test recording in isolation (the orientation-free
  /// condition). This diagnostic mode instead pools every test recording of
  /// a power cycle into one multi-orientation problem.
  bool pool_test_orientations = false;
  /// Per-sample residuals instead of the default pose-mean residual for the
  /// baselines.
  bool per_sample_baselines = false;
  bool parallel_folds = true;
  std::string dataset_label;
};

struct MethodSummary {
  std::string method;
  std::vector<std::size_t> folds;  // successful folds
  std::vector<double> fold_rmse;
  std::vector<double> fold_max_error;
  double mean_rmse = 0.0;
  double std_rmse = 0.0;  // sample std over folds
  double max_error = 0.0;
  std::vector<std::size_t> failed_folds;
};

struct PairReport {
  std::string method_a;  // baseline
  std::string method_b;  // compared (ours when OFBENet)
  bool degenerate = false;
  double t = 0.0;
  double p = 1.0;
  std::size_t dof = 0;
  double improvement_percent = 0.0;  // 100 (rmse_a - rmse_b) / rmse_a
};

struct EvaluationReport {
  std::string dataset_label;
  std::vector<MethodSummary> methods;
  std::vector<PairReport> pairs;
  std::vector<MethodResult> fold_results;
};

/// Five-fold (configurable) cross-validation over labeled recordings:
/// OFBENet is trained per fold on that fold's training windows only, then
/// every method predicts each test recording from its leading window.
/// A method failure marks that fold failed for that method and excludes it
/// from the aggregates (never imputed).
EvaluationReport run_cross_validation(const std::vector<Recording>& recordings,
                                      const EvaluationConfig& config);

/// Pure aggregation of fold results into summaries and pairwise tests;
/// run_cross_validation and the report-regeneration path share it.
EvaluationReport aggregate_report(std::vector<MethodResult> fold_results,
                                  const std::string& dataset_label);

// Report persistence: report.json, per-fold results_fold*.json, and the
// figure-data CSVs (rmse_mean_std.csv, max_errors.csv, ttest.csv).
void write_report_json(const EvaluationReport& report, const std::filesystem::path& path);
void write_fold_results_json(const EvaluationReport& report, const std::filesystem::path& dir);
std::vector<MethodResult> read_fold_results_json(const std::filesystem::path& dir);
void write_figure_csvs(const EvaluationReport& report, const std::filesystem::path& dir);

}  // namespace accelcal
