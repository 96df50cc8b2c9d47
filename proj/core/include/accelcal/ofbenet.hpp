#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "accelcal/geometry.hpp"
#include "accelcal/rng.hpp"
#include "accelcal/signal_model.hpp"
#include "accelcal/tensor.hpp"

namespace accelcal {

/// Architecture hyper-parameters. The default is the production plan:
/// three conv blocks (3 -> 8 -> 32 -> 64 channels, kernel 5), each followed
/// by batch norm, LeakyReLU(0.1), and average pooling of 4, then global
/// average pooling, a 32-wide dense layer, dropout (keep 0.8), and a linear
/// 3-output head.
struct NetworkConfig {
  std::vector<std::size_t> channels{3, 8, 32, 64};
  std::size_t kernel_size = 5;
  std::size_t pool_size = 4;
  std::size_t dense_width = 32;
  double dropout_keep = 0.8;  // inclusion probability
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.9;  // running-statistics retention
  double leaky_slope = 0.1;
};

/// Weights of one conv block. Kernels are stored as (tap j, in channel c,
/// out channel k) with k contiguous: index ((j * c_in) + c) * c_out + k.
struct ConvBlockParams {
  std::vector<double> kernel;
  std::vector<double> bias;
  std::vector<double> bn_gamma;
  std::vector<double> bn_beta;
  std::vector<double> bn_running_mean;
  std::vector<double> bn_running_var;
};

struct NetworkParameters {
  NetworkConfig config;
  std::vector<ConvBlockParams> blocks;
  Tensor2 dense_weight;  // (in x dense_width)
  std::vector<double> dense_bias;
  Tensor2 output_weight;  // (dense_width x 3)
  std::vector<double> output_bias;
  std::uint64_t init_seed = 0;
};

/// Gradients share the parameter layout (running stats stay zero).
using NetworkGradients = NetworkParameters;

enum class Mode { kInference, kTraining };

struct BiasPrediction {
  BiasVector bhat;
};

/// Everything the backward pass needs from a training-mode forward:
/// per-window activations, batch-norm batch statistics, and dropout masks.
struct ForwardTrace {
  struct Block {
    std::vector<Tensor2> conv_input;  // per window
    std::vector<Tensor2> xhat;        // normalized pre-scale activations
    std::vector<Tensor2> relu_out;    // post-activation, pre-pool
    std::vector<double> batch_mean;
    std::vector<double> batch_var;  // biased
    std::vector<double> inv_std;    // 1/sqrt(var + eps)
  };
  std::vector<Block> blocks;
  std::vector<Tensor2> gap_input;               // final pooled feature maps
  std::vector<std::vector<double>> gap_out;     // 64-vectors
  std::vector<std::vector<double>> dense_out;   // pre-dropout
  std::vector<std::vector<double>> drop_mask;   // 0/1 inclusion draws
  std::vector<std::vector<double>> drop_out;    // dense_out * mask / keep
};

struct BatchForwardResult {
  std::vector<Vec3> predictions;
  ForwardTrace trace;  // filled in training mode only
};

// ---------------------------------------------------------------------------
// Layer primitives (also used directly by the layer-oracle tests)
// ---------------------------------------------------------------------------

/// Valid (no padding) 1D convolution; output rows = T - m + 1.
/// Throws ShapeError when the input is shorter than the kernel.
Tensor2 conv1d(const Tensor2& input, const std::vector<double>& kernel,
               const std::vector<double>& bias, std::size_t c_in, std::size_t c_out,
               std::size_t m);

/// Training-mode batch normalization over batch and time per channel, in
/// place. Also emits the batch statistics and normalized activations.
void batch_norm_train(std::vector<Tensor2>& zs, const std::vector<double>& gamma,
                      const std::vector<double>& beta, double eps,
                      std::vector<double>& batch_mean, std::vector<double>& batch_var,
                      std::vector<double>& inv_std, std::vector<Tensor2>& xhat);

/// Inference-mode batch normalization using running statistics, in place.
void batch_norm_infer(Tensor2& z, const std::vector<double>& gamma,
                      const std::vector<double>& beta, const std::vector<double>& running_mean,
                      const std::vector<double>& running_var, double eps);

void leaky_relu(Tensor2& z, double slope = 0.1);

/// Non-overlapping average pooling (stride = P); remainder rows dropped.
Tensor2 avg_pool(const Tensor2& z, std::size_t p);

/// Mean over time of each channel.
std::vector<double> global_avg_pool(const Tensor2& y);

/// z_j = sum_k h_k w(k, j) + b_j.
std::vector<double> dense(const std::vector<double>& h, const Tensor2& weight,
                          const std::vector<double>& bias);

/// Inverted dropout: h * d / keep with d ~ Bernoulli(keep); the inference
/// path is the identity, so no rescaling is needed at test time.
std::vector<double> dropout_train(const std::vector<double>& h, double keep,
                                  SplitMix64& rng, std::vector<double>& mask);

// ---------------------------------------------------------------------------
// Whole-network operations
// ---------------------------------------------------------------------------

/// Seeded Kaiming-style initialization (fan-in scaled normals for weights,
/// zeros for biases, gamma = 1, beta = 0, running stats at identity).
NetworkParameters init_parameters(const NetworkConfig& config, std::uint64_t seed);

/// Gradient container with the same shapes, all zeros.
NetworkGradients zero_gradients(const NetworkParameters& params);

std::size_t parameter_count(const NetworkParameters& params);

/// Shortest window the channel plan can digest.
std::size_t min_input_length(const NetworkConfig& config);

/// Runs the network on a batch of (T x 3) windows. Training mode draws
/// dropout masks from `dropout_rng` (required) and records a ForwardTrace;
/// parameters are never mutated — the caller applies the trace's batch
/// statistics to the running stats. Throws ShapeError when T is below
/// min_input_length.
BatchForwardResult forward_batch(const NetworkParameters& params,
                                 const std::vector<Tensor2>& windows, Mode mode,
                                 SplitMix64* dropout_rng = nullptr);

/// Single-window convenience wrapper.
BiasPrediction forward(const NetworkParameters& params, const Tensor2& window,
                       Mode mode = Mode::kInference, SplitMix64* dropout_rng = nullptr);

/// Analytic gradients of every trainable tensor given the per-window output
/// gradients. The trace must come from a training-mode forward of the same
/// batch under the same parameters.
NetworkGradients backward(const NetworkParameters& params, const ForwardTrace& trace,
                          const std::vector<Vec3>& output_gradients);

/// Folds the trace's batch statistics into the running statistics with the
/// configured momentum.
void update_running_stats(NetworkParameters& params, const ForwardTrace& trace);

/// Visits every trainable tensor in a fixed, documented order
/// (per block: kernel, bias, bn_gamma, bn_beta; then dense and output
/// weights and biases). Used by the optimizer, the serializer, and the
/// finite-difference harness.
void for_each_trainable(NetworkParameters& params,
                        const std::function<void(const std::string&, std::vector<double>&)>& fn);
void for_each_trainable(
    const NetworkParameters& params,
    const std::function<void(const std::string&, const std::vector<double>&)>& fn);

// ---------------------------------------------------------------------------
// Model file I/O (JSON header + little-endian float64 blobs; layout
// documented in docs/model_format.md)
// ---------------------------------------------------------------------------

void save_model(const NetworkParameters& params, const std::filesystem::path& path);
NetworkParameters load_model(const std::filesystem::path& path);

}  // namespace accelcal
