#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "accelcal/signal_model.hpp"

namespace accelcal {

/// One stationary recording plus the metadata needed to label and trace it.
struct Recording {
  std::string id;
  std::string device_id;
  std::string power_cycle_id;
  std::uint64_t seed = 0;
  SignalSegment segment;
  std::optional<OrientationAngles> true_orientation;  // known for synthetic data
  std::optional<BiasVector> true_bias;                // known for synthetic data
  std::optional<BiasVector> label_bias;               // set by labeling
};

/// Fixed-length window paired with its recording's bias label.
struct WindowedExample {
  std::vector<Vec3> window;
  BiasVector target;
};

/// One cross-validation fold. Test sets are pairwise disjoint across folds.
struct FoldSplit {
  std::size_t fold_index = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

/// Outcome of the running-mean convergence scan on one axis.
struct ConvergenceResult {
  bool converged = false;
  std::size_t converged_at_sample = 0;  // 1-based sample count, valid when converged
  std::vector<double> running_mean_trace;
};

// ---------------------------------------------------------------------------
// CSV recording files: header `t,fx,fy,fz`, seconds and m/s^2, LF newlines.
// ---------------------------------------------------------------------------

/// Reads a recording CSV. Throws ParseError (with the offending line) on
/// malformed rows, NaN samples, or non-monotonic time.
Recording ingest_csv(const std::filesystem::path& path, double sample_rate_hz);

/// Writes a segment in the recording CSV format. Values are printed with
/// round-trip precision so ingest_csv(export) is bit-exact.
void export_csv(const SignalSegment& segment, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Labeling
// ---------------------------------------------------------------------------

/// Number of warm-up samples excluded from bias labels, from the running-mean
/// convergence analysis of leveled recordings.
inline constexpr std::size_t kLabelSkipSamples = 4500;

/// Scans one axis for running-mean convergence. The running mean's numerical
/// derivative (central differences) must stay below `threshold` for `window`
/// consecutive indices. Throws InsufficientDataError when T <= window.
ConvergenceResult detect_convergence(const SignalSegment& segment, std::size_t axis,
                                     double threshold = 5e-6, std::size_t window = 40);

/// Ground-truth bias label: mean of samples after `skip` minus the gravity
/// projection at the known orientation. Throws InsufficientDataError when
/// T <= skip.
BiasVector label_bias(const Recording& recording, const OrientationAngles& known_orientation,
                      double g = kStandardGravity, std::size_t skip = kLabelSkipSamples);

/// Rotates the segment so `reference_gravity_direction` maps onto (0,0,-1),
/// using the axis-angle (Rodrigues) rotation between the two directions. The
/// antiparallel case rotates about the x-axis. Throws std::invalid_argument
/// when the reference is not unit length within 1e-6.
SignalSegment align_by_reference(const SignalSegment& segment,
                                 const Vec3& reference_gravity_direction);

/// Splits a labeled recording into non-overlapping windows (stride equal to
/// window size); trailing remainder samples are dropped. Throws StateError on
/// an unlabeled recording.
std::vector<WindowedExample> window_recording(const Recording& recording,
                                              std::size_t window_len);

// ---------------------------------------------------------------------------
// Fold construction
// ---------------------------------------------------------------------------

/// Deterministic k-fold splits. A held-out pool of k*round(N*test_fraction)
/// recordings is drawn (stratified by device when `device_of` is non-empty,
/// matching "randomly drawn from all sensors") and partitioned into k
/// disjoint test sets; each fold trains on every recording outside its test
/// set. Throws std::invalid_argument when the pool would be empty or exceed N.
std::vector<FoldSplit> make_folds(const std::vector<std::string>& recording_ids,
                                  std::size_t k, double test_fraction, std::uint64_t seed,
                                  const std::vector<std::string>& device_of = {});

// ---------------------------------------------------------------------------
// Synthetic dataset generation
// ---------------------------------------------------------------------------

/// How turn-on biases are drawn across power cycles.
enum class BiasMode {
  /// Device-anchored: each device has a fixed offset uniform per axis in
  /// [-bias_range, bias_range]; every power cycle adds Gaussian turn-on
  /// jitter with sigma `turn_on_sigma`. This mirrors consumer MEMS parts,
  /// whose part-to-part offset dwarfs the cycle-to-cycle repeatability.
  kDeviceAnchored,
  /// Independent uniform draw per power cycle (no device structure).
  kPerPowerCycle,
};

struct SynthesisConfig {
  std::size_t devices = 1;
  std::size_t recordings_per_device = 87;
  std::size_t power_cycle_group = 3;  // recordings sharing one turn-on bias
  double duration_s = 80.0;
  double sample_rate_hz = 150.0;
  double sigma = 0.02;
  double g = kStandardGravity;
  BiasMode bias_mode = BiasMode::kDeviceAnchored;
  double bias_range = 0.196;     // +-20 mg device offset span, per axis
  double turn_on_sigma = 0.01;   // per-cycle jitter, device-anchored mode
  bool leveled = false;          // true: zero roll/pitch for every recording
  double pitch_min_deg = -80.0;
  double pitch_max_deg = 60.0;
  double roll_min_deg = -180.0;
  double roll_max_deg = 180.0;
  std::uint64_t seed = 0;
};

/// Leveled preset: 4 devices x 100 recordings, one power cycle per recording.
SynthesisConfig gravity_aligned_config(std::uint64_t seed);

/// Rotated preset: 1 device x 87 recordings, power cycles of 3, pitch in
/// [-80, 60] degrees and roll in [-180, 180].
SynthesisConfig rotated_config(std::uint64_t seed);

/// Generates stationary recordings under the config. Every recording derives
/// its own noise/orientation/bias streams from the root seed, so generation
/// order (or parallelism) cannot change the result.
std::vector<Recording> generate_dataset(const SynthesisConfig& config);

inline std::vector<Recording> generate_gravity_aligned_dataset(std::uint64_t seed) {
  return generate_dataset(gravity_aligned_config(seed));
}
inline std::vector<Recording> generate_rotated_dataset(std::uint64_t seed) {
  return generate_dataset(rotated_config(seed));
}

// ---------------------------------------------------------------------------
// Dataset directories: recording CSVs plus a manifest.json
// ---------------------------------------------------------------------------

struct DatasetManifest {
  int schema_version = 1;
  std::string preset;  // "gravity-aligned", "rotated", or "ingested"
  double sample_rate_hz = 150.0;
  double g = kStandardGravity;
  std::uint64_t root_seed = 0;
  std::string config_json;  // effective synthesis config, echoed verbatim
};

/// Writes recordings and manifest.json into `dir`. Set `write_csv` to false
/// to emit only the manifest (metadata-only use).
void save_dataset(const std::vector<Recording>& recordings, const DatasetManifest& manifest,
                  const std::filesystem::path& dir, bool write_csv = true);

/// Loads a dataset directory written by save_dataset (or assembled by hand
/// following the manifest schema).
std::pair<std::vector<Recording>, DatasetManifest> load_dataset(
    const std::filesystem::path& dir);

/// Rewrites only the manifest of an existing dataset directory (labels).
void update_manifest(const std::vector<Recording>& recordings, const DatasetManifest& manifest,
                     const std::filesystem::path& dir);

}  // namespace accelcal
