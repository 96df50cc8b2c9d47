#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "accelcal/dataset.hpp"
#include "accelcal/ofbenet.hpp"

namespace accelcal {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second-moment state for one parameter tensor.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;
};

/// One bias-corrected Adam update on a tensor. Throws NonFiniteError naming
/// `tensor_name` when the gradient contains NaN or infinity.
void adam_step(std::vector<double>& values, const std::vector<double>& grad, AdamState& state,
               double lr, const AdamConfig& config, const std::string& tensor_name);

struct TrainingConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 8;
  double lr_factor = 0.2;             // multiplier applied on plateau
  std::size_t lr_patience = 15;       // epochs without improvement before the cut
  std::size_t early_stop_patience = 5;
  std::size_t max_epochs = 300;
  double improvement_rel_threshold = 1e-4;
  /// Literal schedule: early stopping fires after `early_stop_patience` flat
  /// epochs outright, which makes the (longer) LR patience unreachable. The
  /// default instead arms early stopping only once a learning-rate cut has
  /// happened and resets its counter on every cut, so the schedule gets a
  /// chance to help before training gives up.
  bool strict_schedule = false;
  std::uint64_t seed = 0;
  AdamConfig adam;
  /// When set, the best parameters so far are checkpointed here.
  std::filesystem::path checkpoint_path;
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;
};

struct TrainingLog {
  std::vector<EpochStats> epochs;
  std::size_t stopped_epoch = 0;  // number of epochs actually run
  std::size_t best_epoch = 0;     // 1-based epoch with the lowest val loss
  double best_val_loss = 0.0;
};

struct TrainResult {
  NetworkParameters params;  // parameters from the best validation epoch
  TrainingLog log;
};

/// Mean over the batch of the squared error-vector norm, (m/s^2)^2.
double mse_loss(const std::vector<Vec3>& targets, const std::vector<Vec3>& predictions);

/// Trains the network with seeded shuffled mini-batches, epoch-end
/// validation in inference mode, reduce-on-plateau learning rate, and early
/// stopping. Returns the best-validation parameters. Throws NonFiniteError
/// on divergence (the message carries the last good checkpoint path when
/// checkpointing is enabled).
TrainResult train(const NetworkParameters& initial,
                  const std::vector<WindowedExample>& train_set,
                  const std::vector<WindowedExample>& val_set, const TrainingConfig& config);

/// CSV: epoch,train_loss,val_loss,lr,seconds.
void write_training_log_csv(const TrainingLog& log, const std::filesystem::path& path);

/// JSON summary (epochs run, best epoch, best val loss, final lr). Timing is
/// deliberately left out so reruns are byte-identical.
void write_training_summary_json(const TrainingLog& log, const std::filesystem::path& path);

}  // namespace accelcal
