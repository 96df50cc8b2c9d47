#include "accelcal/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "accelcal/errors.hpp"
#include "accelcal/rng.hpp"

namespace accelcal {

void adam_step(std::vector<double>& values, const std::vector<double>& grad, AdamState& state,
               double lr, const AdamConfig& config, const std::string& tensor_name) {
  if (grad.size() != values.size()) throw ShapeError("adam_step: gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(values.size(), 0.0);
    state.v.assign(values.size(), 0.0);
  }
  for (double g : grad) {
    if (!std::isfinite(g)) {
      throw NonFiniteError("adam_step: non-finite gradient in tensor '" + tensor_name + "'");
    }
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < values.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grad[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    values[i] -= lr * mhat / (std::sqrt(vhat) + config.epsilon);
  }
}

double mse_loss(const std::vector<Vec3>& targets, const std::vector<Vec3>& predictions) {
  if (targets.empty()) throw std::invalid_argument("mse_loss: empty batch");
  if (targets.size() != predictions.size()) {
    throw std::invalid_argument("mse_loss: batch size mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Vec3 e = targets[i] - predictions[i];
    acc += dot(e, e);
  }
  return acc / static_cast<double>(targets.size());
}

namespace {

Tensor2 to_tensor(const std::vector<Vec3>& window) {
  Tensor2 t(window.size(), 3);
  for (std::size_t i = 0; i < window.size(); ++i) {
    t(i, 0) = window[i].x;
    t(i, 1) = window[i].y;
    t(i, 2) = window[i].z;
  }
  return t;
}

/// Mean inference-mode loss over a set, evaluated in fixed-size chunks.
double evaluate_loss(const NetworkParameters& params, const std::vector<Tensor2>& windows,
                     const std::vector<Vec3>& targets) {
  constexpr std::size_t kChunk = 32;
  double acc = 0.0;
  for (std::size_t start = 0; start < windows.size(); start += kChunk) {
    const std::size_t end = std::min(start + kChunk, windows.size());
    const std::vector<Tensor2> chunk(windows.begin() + static_cast<long>(start),
                                     windows.begin() + static_cast<long>(end));
    const auto out = forward_batch(params, chunk, Mode::kInference);
    for (std::size_t i = 0; i < out.predictions.size(); ++i) {
      const Vec3 e = targets[start + i] - out.predictions[i];
      acc += dot(e, e);
    }
  }
  return acc / static_cast<double>(windows.size());
}

}  // namespace

TrainResult train(const NetworkParameters& initial,
                  const std::vector<WindowedExample>& train_set,
                  const std::vector<WindowedExample>& val_set, const TrainingConfig& config) {
  if (train_set.empty() || val_set.empty()) {
    throw std::invalid_argument("train: training and validation sets must be non-empty");
  }
  if (config.batch_size < 1 || config.max_epochs < 1 || config.lr_patience < 1 ||
      config.early_stop_patience < 1 || !(config.lr_factor > 0.0) || config.lr_factor >= 1.0) {
    throw std::invalid_argument("train: invalid schedule configuration");
  }

  std::vector<Tensor2> train_windows, val_windows;
  std::vector<Vec3> train_targets, val_targets;
  train_windows.reserve(train_set.size());
  for (const auto& ex : train_set) {
    train_windows.push_back(to_tensor(ex.window));
    train_targets.push_back(ex.target);
  }
  val_windows.reserve(val_set.size());
  for (const auto& ex : val_set) {
    val_windows.push_back(to_tensor(ex.window));
    val_targets.push_back(ex.target);
  }

  NetworkParameters params = initial;

  // One Adam state per trainable tensor, in for_each_trainable order.
  std::size_t n_tensors = 0;
  for_each_trainable(params, [&n_tensors](const std::string&, std::vector<double>&) {
    ++n_tensors;
  });
  std::vector<AdamState> adam_states(n_tensors);

  SplitMix64 dropout_rng(derive_seed(config.seed, "dropout"));

  TrainResult result;
  result.params = params;
  TrainingLog& log = result.log;
  double best_val = std::numeric_limits<double>::infinity();
  double lr = config.learning_rate;
  std::size_t lr_counter = 0;
  std::size_t es_counter = 0;
  bool lr_reduced = false;

  std::vector<std::size_t> order(train_windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();

    SplitMix64 shuffle_rng(derive_seed(config.seed, "shuffle", epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.next_below(i)]);
    }

    double train_acc = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, order.size());
      const std::size_t bsize = end - start;
      std::vector<Tensor2> batch;
      std::vector<Vec3> targets;
      batch.reserve(bsize);
      targets.reserve(bsize);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train_windows[order[i]]);
        targets.push_back(train_targets[order[i]]);
      }

      auto fwd = forward_batch(params, batch, Mode::kTraining, &dropout_rng);
      std::vector<Vec3> dy(bsize);
      const double inv_b = 1.0 / static_cast<double>(bsize);
      for (std::size_t i = 0; i < bsize; ++i) {
        const Vec3 e = fwd.predictions[i] - targets[i];
        train_acc += dot(e, e);
        dy[i] = 2.0 * inv_b * e;
      }

      NetworkGradients grads = backward(params, fwd.trace, dy);
      std::vector<const std::vector<double>*> grad_tensors;
      grad_tensors.reserve(adam_states.size());
      for_each_trainable(grads, [&](const std::string&, std::vector<double>& g) {
        grad_tensors.push_back(&g);
      });
      std::size_t cursor = 0;
      for_each_trainable(params, [&](const std::string& name, std::vector<double>& values) {
        adam_step(values, *grad_tensors[cursor], adam_states[cursor], lr, config.adam, name);
        ++cursor;
      });
      update_running_stats(params, fwd.trace);
    }
    const double train_loss = train_acc / static_cast<double>(train_windows.size());

    const double val_loss = evaluate_loss(params, val_windows, val_targets);
    if (!std::isfinite(val_loss)) {
      std::string hint = config.checkpoint_path.empty()
                             ? std::string(" (no checkpoint configured)")
                             : " (last good checkpoint: " + config.checkpoint_path.string() + ")";
      throw NonFiniteError("train: validation loss diverged at epoch " +
                           std::to_string(epoch + 1) + hint);
    }

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
    log.epochs.push_back({train_loss, val_loss, lr, seconds});
    log.stopped_epoch = epoch + 1;

    if (val_loss < best_val * (1.0 - config.improvement_rel_threshold)) {
      best_val = val_loss;
      log.best_epoch = epoch + 1;
      log.best_val_loss = val_loss;
      result.params = params;
      lr_counter = 0;
      es_counter = 0;
      if (!config.checkpoint_path.empty()) save_model(result.params, config.checkpoint_path);
    } else {
      ++lr_counter;
      ++es_counter;
      if (lr_counter >= config.lr_patience) {
        lr *= config.lr_factor;
        lr_counter = 0;
        lr_reduced = true;
        if (!config.strict_schedule) es_counter = 0;
      } else if ((config.strict_schedule || lr_reduced) &&
                 es_counter >= config.early_stop_patience) {
        break;
      }
    }
  }

  if (log.best_epoch == 0) {
    // Validation never improved on the initial parameters; report the final
    // epoch's state honestly.
    log.best_epoch = log.stopped_epoch;
    log.best_val_loss = log.epochs.back().val_loss;
    result.params = params;
  }
  return result;
}

void write_training_log_csv(const TrainingLog& log, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("write_training_log_csv: cannot open " + path.string());
  f << "epoch,train_loss,val_loss,lr,seconds\n";
  char buf[32];
  const auto put = [&](double v, char sep) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    f.write(buf, res.ptr - buf);
    f.put(sep);
  };
  for (std::size_t i = 0; i < log.epochs.size(); ++i) {
    f << (i + 1) << ',';
    put(log.epochs[i].train_loss, ',');
    put(log.epochs[i].val_loss, ',');
    put(log.epochs[i].learning_rate, ',');
    put(log.epochs[i].seconds, '\n');
  }
}

void write_training_summary_json(const TrainingLog& log, const std::filesystem::path& path) {
  nlohmann::json j;
  j["epochs_run"] = log.stopped_epoch;
  j["best_epoch"] = log.best_epoch;
  j["best_val_loss"] = log.best_val_loss;
  j["final_lr"] = log.epochs.empty() ? 0.0 : log.epochs.back().learning_rate;
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("write_training_summary_json: cannot open " + path.string());
  f << j.dump(2) << '\n';
}

}  // namespace accelcal
