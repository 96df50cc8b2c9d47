#include "accelcal/ofbenet.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "accelcal/errors.hpp"

namespace accelcal {

namespace {

using nlohmann::json;

void check_config(const NetworkConfig& c) {
  if (c.channels.size() < 2) throw std::invalid_argument("NetworkConfig: need >= 1 conv block");
  for (std::size_t ch : c.channels) {
    if (ch < 1) throw std::invalid_argument("NetworkConfig: zero-channel stage");
  }
  if (c.kernel_size < 1 || c.pool_size < 1 || c.dense_width < 1) {
    throw std::invalid_argument("NetworkConfig: sizes must be >= 1");
  }
  if (!(c.dropout_keep > 0.0) || c.dropout_keep > 1.0) {
    throw std::invalid_argument("NetworkConfig: dropout keep probability must be in (0, 1]");
  }
}

}  // namespace

Tensor2 conv1d(const Tensor2& input, const std::vector<double>& kernel,
               const std::vector<double>& bias, std::size_t c_in, std::size_t c_out,
               std::size_t m) {
  if (input.cols != c_in) throw ShapeError("conv1d: input channel mismatch");
  if (kernel.size() != m * c_in * c_out || bias.size() != c_out) {
    throw ShapeError("conv1d: kernel/bias size mismatch");
  }
  if (input.rows < m) {
    throw ShapeError("conv1d: input length " + std::to_string(input.rows) +
                     " is shorter than the kernel (" + std::to_string(m) + ")");
  }
  const std::size_t tp = input.rows - m + 1;
  Tensor2 out(tp, c_out);
  for (std::size_t t = 0; t < tp; ++t) {
    double* o = out.row(t);
    std::memcpy(o, bias.data(), c_out * sizeof(double));
    for (std::size_t j = 0; j < m; ++j) {
      const double* xr = input.row(t + j);
      const double* wbase = kernel.data() + j * c_in * c_out;
      for (std::size_t c = 0; c < c_in; ++c) {
        const double xv = xr[c];
        const double* w = wbase + c * c_out;
        for (std::size_t k = 0; k < c_out; ++k) o[k] += xv * w[k];
      }
    }
  }
  return out;
}

void batch_norm_train(std::vector<Tensor2>& zs, const std::vector<double>& gamma,
                      const std::vector<double>& beta, double eps,
                      std::vector<double>& batch_mean, std::vector<double>& batch_var,
                      std::vector<double>& inv_std, std::vector<Tensor2>& xhat) {
  const std::size_t c_out = gamma.size();
  batch_mean.assign(c_out, 0.0);
  batch_var.assign(c_out, 0.0);
  inv_std.assign(c_out, 0.0);

  std::size_t count = 0;
  for (const Tensor2& z : zs) {
    if (z.cols != c_out) throw ShapeError("batch_norm_train: channel mismatch");
    count += z.rows;
    for (std::size_t t = 0; t < z.rows; ++t) {
      const double* row = z.row(t);
      for (std::size_t c = 0; c < c_out; ++c) batch_mean[c] += row[c];
    }
  }
  if (count == 0) throw ShapeError("batch_norm_train: empty batch");
  for (double& v : batch_mean) v /= static_cast<double>(count);

  for (const Tensor2& z : zs) {
    for (std::size_t t = 0; t < z.rows; ++t) {
      const double* row = z.row(t);
      for (std::size_t c = 0; c < c_out; ++c) {
        const double d = row[c] - batch_mean[c];
        batch_var[c] += d * d;
      }
    }
  }
  for (double& v : batch_var) v /= static_cast<double>(count);
  for (std::size_t c = 0; c < c_out; ++c) inv_std[c] = 1.0 / std::sqrt(batch_var[c] + eps);

  xhat.clear();
  xhat.reserve(zs.size());
  for (Tensor2& z : zs) {
    Tensor2 xh(z.rows, z.cols);
    for (std::size_t t = 0; t < z.rows; ++t) {
      const double* zr = z.row(t);
      double* xr = xh.row(t);
      for (std::size_t c = 0; c < c_out; ++c) xr[c] = (zr[c] - batch_mean[c]) * inv_std[c];
    }
    for (std::size_t t = 0; t < z.rows; ++t) {
      double* zr = z.row(t);
      const double* xr = xh.row(t);
      for (std::size_t c = 0; c < c_out; ++c) zr[c] = gamma[c] * xr[c] + beta[c];
    }
    xhat.push_back(std::move(xh));
  }
}

void batch_norm_infer(Tensor2& z, const std::vector<double>& gamma,
                      const std::vector<double>& beta, const std::vector<double>& running_mean,
                      const std::vector<double>& running_var, double eps) {
  const std::size_t c_out = gamma.size();
  if (z.cols != c_out) throw ShapeError("batch_norm_infer: channel mismatch");
  std::vector<double> scale(c_out), shift(c_out);
  for (std::size_t c = 0; c < c_out; ++c) {
    scale[c] = gamma[c] / std::sqrt(running_var[c] + eps);
    shift[c] = beta[c] - scale[c] * running_mean[c];
  }
  for (std::size_t t = 0; t < z.rows; ++t) {
    double* row = z.row(t);
    for (std::size_t c = 0; c < c_out; ++c) row[c] = scale[c] * row[c] + shift[c];
  }
}

void leaky_relu(Tensor2& z, double slope) {
  for (double& v : z.data) {
    if (v < 0.0) v *= slope;
  }
}

Tensor2 avg_pool(const Tensor2& z, std::size_t p) {
  if (p < 1) throw ShapeError("avg_pool: pool size must be >= 1");
  if (z.rows < p) throw ShapeError("avg_pool: input shorter than the pool window");
  const std::size_t tp = z.rows / p;
  Tensor2 out(tp, z.cols);
  const double denom = static_cast<double>(p);
  for (std::size_t t = 0; t < tp; ++t) {
    double* o = out.row(t);
    for (std::size_t r = 0; r < p; ++r) {
      const double* zr = z.row(t * p + r);
      for (std::size_t c = 0; c < z.cols; ++c) o[c] += zr[c];
    }
    for (std::size_t c = 0; c < z.cols; ++c) o[c] /= denom;
  }
  return out;
}

std::vector<double> global_avg_pool(const Tensor2& y) {
  if (y.rows == 0) throw ShapeError("global_avg_pool: empty feature map");
  std::vector<double> h(y.cols, 0.0);
  for (std::size_t t = 0; t < y.rows; ++t) {
    const double* row = y.row(t);
    for (std::size_t c = 0; c < y.cols; ++c) h[c] += row[c];
  }
  const double denom = static_cast<double>(y.rows);
  for (double& v : h) v /= denom;
  return h;
}

std::vector<double> dense(const std::vector<double>& h, const Tensor2& weight,
                          const std::vector<double>& bias) {
  if (h.size() != weight.rows || bias.size() != weight.cols) {
    throw ShapeError("dense: shape mismatch");
  }
  std::vector<double> z = bias;
  for (std::size_t k = 0; k < weight.rows; ++k) {
    const double hk = h[k];
    const double* wr = weight.row(k);
    for (std::size_t j = 0; j < weight.cols; ++j) z[j] += hk * wr[j];
  }
  return z;
}

std::vector<double> dropout_train(const std::vector<double>& h, double keep, SplitMix64& rng,
                                  std::vector<double>& mask) {
  if (!(keep > 0.0) || keep > 1.0) {
    throw std::invalid_argument("dropout_train: keep probability must be in (0, 1]");
  }
  mask.resize(h.size());
  std::vector<double> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    mask[i] = rng.next_double() < keep ? 1.0 : 0.0;
    out[i] = h[i] * mask[i] / keep;
  }
  return out;
}

NetworkParameters init_parameters(const NetworkConfig& config, std::uint64_t seed) {
  check_config(config);
  NetworkParameters p;
  p.config = config;
  p.init_seed = seed;
  SplitMix64 rng(derive_seed(seed, "ofbenet-init"));

  const std::size_t n_blocks = config.channels.size() - 1;
  p.blocks.resize(n_blocks);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t c_in = config.channels[b];
    const std::size_t c_out = config.channels[b + 1];
    ConvBlockParams& blk = p.blocks[b];
    blk.kernel.resize(config.kernel_size * c_in * c_out);
    // Kaiming fan-in scaling with the LeakyReLU gain.
    const double fan_in = static_cast<double>(config.kernel_size * c_in);
    const double std_dev =
        std::sqrt(2.0 / ((1.0 + config.leaky_slope * config.leaky_slope) * fan_in));
    for (double& w : blk.kernel) w = std_dev * rng.next_gaussian();
    blk.bias.assign(c_out, 0.0);
    blk.bn_gamma.assign(c_out, 1.0);
    blk.bn_beta.assign(c_out, 0.0);
    blk.bn_running_mean.assign(c_out, 0.0);
    blk.bn_running_var.assign(c_out, 1.0);
  }

  const std::size_t feat = config.channels.back();
  p.dense_weight = Tensor2(feat, config.dense_width);
  const double dense_std = std::sqrt(1.0 / static_cast<double>(feat));
  for (double& w : p.dense_weight.data) w = dense_std * rng.next_gaussian();
  p.dense_bias.assign(config.dense_width, 0.0);

  p.output_weight = Tensor2(config.dense_width, 3);
  const double out_std = std::sqrt(1.0 / static_cast<double>(config.dense_width));
  for (double& w : p.output_weight.data) w = out_std * rng.next_gaussian();
  p.output_bias.assign(3, 0.0);
  return p;
}

NetworkGradients zero_gradients(const NetworkParameters& params) {
  NetworkGradients g;
  g.config = params.config;
  g.blocks.resize(params.blocks.size());
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    const ConvBlockParams& src = params.blocks[b];
    ConvBlockParams& dst = g.blocks[b];
    dst.kernel.assign(src.kernel.size(), 0.0);
    dst.bias.assign(src.bias.size(), 0.0);
    dst.bn_gamma.assign(src.bn_gamma.size(), 0.0);
    dst.bn_beta.assign(src.bn_beta.size(), 0.0);
    dst.bn_running_mean.assign(src.bn_running_mean.size(), 0.0);
    dst.bn_running_var.assign(src.bn_running_var.size(), 0.0);
  }
  g.dense_weight = Tensor2(params.dense_weight.rows, params.dense_weight.cols);
  g.dense_bias.assign(params.dense_bias.size(), 0.0);
  g.output_weight = Tensor2(params.output_weight.rows, params.output_weight.cols);
  g.output_bias.assign(params.output_bias.size(), 0.0);
  return g;
}

std::size_t parameter_count(const NetworkParameters& params) {
  std::size_t n = 0;
  for_each_trainable(params,
                     [&n](const std::string&, const std::vector<double>& t) { n += t.size(); });
  return n;
}

std::size_t min_input_length(const NetworkConfig& config) {
  // Walk the shape requirements backward: the final pooled map needs at
  // least one row, each pool of P needs P rows in, each valid conv of m
  // needs out + m - 1 rows in.
  std::size_t need = 1;
  for (std::size_t b = config.channels.size() - 1; b-- > 0;) {
    need = need * config.pool_size;          // rows entering the pool
    need = need + config.kernel_size - 1;    // rows entering the conv
  }
  return need;
}

BatchForwardResult forward_batch(const NetworkParameters& params,
                                 const std::vector<Tensor2>& windows, Mode mode,
                                 SplitMix64* dropout_rng) {
  check_config(params.config);
  if (windows.empty()) throw ShapeError("forward_batch: empty batch");
  const NetworkConfig& cfg = params.config;
  const std::size_t min_len = min_input_length(cfg);
  for (const Tensor2& w : windows) {
    if (w.cols != cfg.channels[0]) throw ShapeError("forward_batch: window channel mismatch");
    if (w.rows < min_len) {
      throw ShapeError("forward_batch: window length " + std::to_string(w.rows) +
                       " is below the minimum viable length " + std::to_string(min_len));
    }
  }
  const bool training = mode == Mode::kTraining;
  if (training && dropout_rng == nullptr) {
    throw std::invalid_argument("forward_batch: training mode needs a dropout RNG");
  }

  BatchForwardResult result;
  const std::size_t n_blocks = params.blocks.size();
  if (training) result.trace.blocks.resize(n_blocks);

  std::vector<Tensor2> acts = windows;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const ConvBlockParams& blk = params.blocks[b];
    const std::size_t c_in = cfg.channels[b];
    const std::size_t c_out = cfg.channels[b + 1];

    if (training) result.trace.blocks[b].conv_input = acts;

    std::vector<Tensor2> zs;
    zs.reserve(acts.size());
    for (const Tensor2& x : acts) {
      zs.push_back(conv1d(x, blk.kernel, blk.bias, c_in, c_out, cfg.kernel_size));
    }

    if (training) {
      ForwardTrace::Block& tb = result.trace.blocks[b];
      batch_norm_train(zs, blk.bn_gamma, blk.bn_beta, cfg.bn_epsilon, tb.batch_mean,
                       tb.batch_var, tb.inv_std, tb.xhat);
    } else {
      for (Tensor2& z : zs) {
        batch_norm_infer(z, blk.bn_gamma, blk.bn_beta, blk.bn_running_mean,
                         blk.bn_running_var, cfg.bn_epsilon);
      }
    }

    for (Tensor2& z : zs) leaky_relu(z, cfg.leaky_slope);
    if (training) result.trace.blocks[b].relu_out = zs;

    acts.clear();
    acts.reserve(zs.size());
    for (const Tensor2& z : zs) acts.push_back(avg_pool(z, cfg.pool_size));
  }

  if (training) result.trace.gap_input = acts;
  result.predictions.reserve(windows.size());
  for (std::size_t w = 0; w < acts.size(); ++w) {
    std::vector<double> h = global_avg_pool(acts[w]);
    std::vector<double> z = dense(h, params.dense_weight, params.dense_bias);
    std::vector<double> mask;
    std::vector<double> hd;
    if (training) {
      hd = dropout_train(z, cfg.dropout_keep, *dropout_rng, mask);
    } else {
      hd = z;  // inverted dropout: inference is the identity
    }
    const std::vector<double> y = dense(hd, params.output_weight, params.output_bias);
    result.predictions.push_back({y[0], y[1], y[2]});
    if (training) {
      result.trace.gap_out.push_back(std::move(h));
      result.trace.dense_out.push_back(std::move(z));
      result.trace.drop_mask.push_back(std::move(mask));
      result.trace.drop_out.push_back(std::move(hd));
    }
  }
  return result;
}

BiasPrediction forward(const NetworkParameters& params, const Tensor2& window, Mode mode,
                       SplitMix64* dropout_rng) {
  const auto res = forward_batch(params, {window}, mode, dropout_rng);
  return {res.predictions[0]};
}

NetworkGradients backward(const NetworkParameters& params, const ForwardTrace& trace,
                          const std::vector<Vec3>& output_gradients) {
  const NetworkConfig& cfg = params.config;
  const std::size_t batch = output_gradients.size();
  if (trace.blocks.size() != params.blocks.size() || trace.gap_out.size() != batch ||
      trace.gap_input.size() != batch) {
    throw ShapeError("backward: trace does not match the parameters or batch");
  }

  NetworkGradients grads = zero_gradients(params);
  const std::size_t feat = cfg.channels.back();

  // Head: output layer, dropout, dense, global average pooling.
  std::vector<Tensor2> dpool(batch);  // gradient w.r.t. the final pooled maps
  std::vector<double> dhd(cfg.dense_width), dz(cfg.dense_width), dh(feat);
  for (std::size_t w = 0; w < batch; ++w) {
    const Vec3& dy = output_gradients[w];
    const std::vector<double>& hd = trace.drop_out[w];
    for (std::size_t j = 0; j < cfg.dense_width; ++j) {
      double* gw = grads.output_weight.row(j);
      const double* pw = params.output_weight.row(j);
      gw[0] += hd[j] * dy.x;
      gw[1] += hd[j] * dy.y;
      gw[2] += hd[j] * dy.z;
      dhd[j] = pw[0] * dy.x + pw[1] * dy.y + pw[2] * dy.z;
    }
    grads.output_bias[0] += dy.x;
    grads.output_bias[1] += dy.y;
    grads.output_bias[2] += dy.z;

    const std::vector<double>& mask = trace.drop_mask[w];
    for (std::size_t j = 0; j < cfg.dense_width; ++j) {
      dz[j] = dhd[j] * mask[j] / cfg.dropout_keep;
    }

    const std::vector<double>& h = trace.gap_out[w];
    for (std::size_t k = 0; k < feat; ++k) {
      double* gw = grads.dense_weight.row(k);
      const double* pw = params.dense_weight.row(k);
      double acc = 0.0;
      for (std::size_t j = 0; j < cfg.dense_width; ++j) {
        gw[j] += h[k] * dz[j];
        acc += pw[j] * dz[j];
      }
      dh[k] = acc;
    }
    for (std::size_t j = 0; j < cfg.dense_width; ++j) grads.dense_bias[j] += dz[j];

    const Tensor2& gap_in = trace.gap_input[w];
    Tensor2 dyp(gap_in.rows, gap_in.cols);
    const double inv_len = 1.0 / static_cast<double>(gap_in.rows);
    for (std::size_t t = 0; t < gap_in.rows; ++t) {
      double* row = dyp.row(t);
      for (std::size_t c = 0; c < feat; ++c) row[c] = dh[c] * inv_len;
    }
    dpool[w] = std::move(dyp);
  }

  // Conv blocks, last to first.
  for (std::size_t b = params.blocks.size(); b-- > 0;) {
    const ConvBlockParams& blk = params.blocks[b];
    const ForwardTrace::Block& tb = trace.blocks[b];
    const std::size_t c_in = cfg.channels[b];
    const std::size_t c_out = cfg.channels[b + 1];

    // Pool backward: every pooled row spreads its gradient over its window.
    std::vector<Tensor2> dz_post(batch);
    for (std::size_t w = 0; w < batch; ++w) {
      const Tensor2& relu_out = tb.relu_out[w];
      Tensor2 d(relu_out.rows, relu_out.cols);
      const double inv_p = 1.0 / static_cast<double>(cfg.pool_size);
      for (std::size_t t = 0; t < dpool[w].rows; ++t) {
        const double* src = dpool[w].row(t);
        for (std::size_t r = 0; r < cfg.pool_size; ++r) {
          double* dst = d.row(t * cfg.pool_size + r);
          for (std::size_t c = 0; c < c_out; ++c) dst[c] = src[c] * inv_p;
        }
      }
      // LeakyReLU backward; the activation is sign-preserving, so the output
      // sign identifies the branch.
      for (std::size_t i = 0; i < d.data.size(); ++i) {
        if (relu_out.data[i] < 0.0) d.data[i] *= cfg.leaky_slope;
      }
      dz_post[w] = std::move(d);
    }

    // Batch-norm backward with batch-statistics terms.
    std::size_t count = 0;
    std::vector<double> sum_dy(c_out, 0.0), sum_dy_xhat(c_out, 0.0);
    for (std::size_t w = 0; w < batch; ++w) {
      const Tensor2& d = dz_post[w];
      const Tensor2& xh = tb.xhat[w];
      count += d.rows;
      for (std::size_t t = 0; t < d.rows; ++t) {
        const double* dr = d.row(t);
        const double* xr = xh.row(t);
        for (std::size_t c = 0; c < c_out; ++c) {
          sum_dy[c] += dr[c];
          sum_dy_xhat[c] += dr[c] * xr[c];
        }
      }
    }
    for (std::size_t c = 0; c < c_out; ++c) {
      grads.blocks[b].bn_gamma[c] += sum_dy_xhat[c];
      grads.blocks[b].bn_beta[c] += sum_dy[c];
    }
    const double inv_count = 1.0 / static_cast<double>(count);
    for (std::size_t w = 0; w < batch; ++w) {
      Tensor2& d = dz_post[w];
      const Tensor2& xh = tb.xhat[w];
      for (std::size_t t = 0; t < d.rows; ++t) {
        double* dr = d.row(t);
        const double* xr = xh.row(t);
        for (std::size_t c = 0; c < c_out; ++c) {
          dr[c] = blk.bn_gamma[c] * tb.inv_std[c] *
                  (dr[c] - sum_dy[c] * inv_count - xr[c] * sum_dy_xhat[c] * inv_count);
        }
      }
    }

    // Conv backward: weight/bias gradients, then the input gradient feeding
    // the previous block's pool (skipped at the first block).
    for (std::size_t w = 0; w < batch; ++w) {
      const Tensor2& x = tb.conv_input[w];
      const Tensor2& dzc = dz_post[w];
      Tensor2 dx;
      if (b > 0) dx = Tensor2(x.rows, x.cols);
      for (std::size_t t = 0; t < dzc.rows; ++t) {
        const double* dzr = dzc.row(t);
        for (std::size_t c = 0; c < c_out; ++c) grads.blocks[b].bias[c] += dzr[c];
        for (std::size_t j = 0; j < cfg.kernel_size; ++j) {
          const double* xr = x.row(t + j);
          double* dxr = b > 0 ? dx.row(t + j) : nullptr;
          for (std::size_t c = 0; c < c_in; ++c) {
            const double xv = xr[c];
            double* dwrow = grads.blocks[b].kernel.data() + (j * c_in + c) * c_out;
            const double* wrow = blk.kernel.data() + (j * c_in + c) * c_out;
            double acc = 0.0;
            for (std::size_t k = 0; k < c_out; ++k) {
              dwrow[k] += xv * dzr[k];
              acc += wrow[k] * dzr[k];
            }
            if (dxr) dxr[c] += acc;
          }
        }
      }
      if (b > 0) dpool[w] = std::move(dx);
    }
  }
  return grads;
}

void update_running_stats(NetworkParameters& params, const ForwardTrace& trace) {
  const double mom = params.config.bn_momentum;
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    ConvBlockParams& blk = params.blocks[b];
    const ForwardTrace::Block& tb = trace.blocks[b];
    for (std::size_t c = 0; c < blk.bn_running_mean.size(); ++c) {
      blk.bn_running_mean[c] = mom * blk.bn_running_mean[c] + (1.0 - mom) * tb.batch_mean[c];
      blk.bn_running_var[c] = mom * blk.bn_running_var[c] + (1.0 - mom) * tb.batch_var[c];
    }
  }
}

namespace {

template <typename Params, typename Fn>
void visit_trainable(Params& params, const Fn& fn) {
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    const std::string prefix = "block" + std::to_string(b) + ".";
    fn(prefix + "kernel", params.blocks[b].kernel);
    fn(prefix + "bias", params.blocks[b].bias);
    fn(prefix + "bn_gamma", params.blocks[b].bn_gamma);
    fn(prefix + "bn_beta", params.blocks[b].bn_beta);
  }
  fn("dense.weight", params.dense_weight.data);
  fn("dense.bias", params.dense_bias);
  fn("output.weight", params.output_weight.data);
  fn("output.bias", params.output_bias);
}

template <typename Params, typename Fn>
void visit_all_tensors(Params& params, const Fn& fn) {
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    const std::string prefix = "block" + std::to_string(b) + ".";
    fn(prefix + "kernel", params.blocks[b].kernel);
    fn(prefix + "bias", params.blocks[b].bias);
    fn(prefix + "bn_gamma", params.blocks[b].bn_gamma);
    fn(prefix + "bn_beta", params.blocks[b].bn_beta);
    fn(prefix + "bn_running_mean", params.blocks[b].bn_running_mean);
    fn(prefix + "bn_running_var", params.blocks[b].bn_running_var);
  }
  fn("dense.weight", params.dense_weight.data);
  fn("dense.bias", params.dense_bias);
  fn("output.weight", params.output_weight.data);
  fn("output.bias", params.output_bias);
}

}  // namespace

void for_each_trainable(
    NetworkParameters& params,
    const std::function<void(const std::string&, std::vector<double>&)>& fn) {
  visit_trainable(params, fn);
}

void for_each_trainable(
    const NetworkParameters& params,
    const std::function<void(const std::string&, const std::vector<double>&)>& fn) {
  visit_trainable(params, fn);
}

namespace {

constexpr char kMagic[4] = {'O', 'F', 'B', 'E'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return v;
}

void put_f64le(std::string& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double get_f64le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_model(const NetworkParameters& params, const std::filesystem::path& path) {
  json header;
  header["schema_version"] = 1;
  header["channels"] = params.config.channels;
  header["kernel_size"] = params.config.kernel_size;
  header["pool_size"] = params.config.pool_size;
  header["dense_width"] = params.config.dense_width;
  header["dropout_keep"] = params.config.dropout_keep;
  header["bn_epsilon"] = params.config.bn_epsilon;
  header["bn_momentum"] = params.config.bn_momentum;
  header["leaky_slope"] = params.config.leaky_slope;
  header["seed"] = params.init_seed;
  json tensors = json::array();
  visit_all_tensors(params, [&tensors](const std::string& name, const std::vector<double>& t) {
    tensors.push_back({{"name", name}, {"size", t.size()}});
  });
  header["tensors"] = std::move(tensors);
  const std::string header_str = header.dump();

  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(header_str.size()));
  out += header_str;
  visit_all_tensors(params, [&out](const std::string&, const std::vector<double>& t) {
    for (double v : t) put_f64le(out, v);
  });

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("save_model: cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("save_model: write failed for " + path.string());
}

NetworkParameters load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("load_model: cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error("load_model: " + path.string() + " is not a model file");
  }
  if (get_u32(bytes.data() + 4) != kFormatVersion) {
    throw Error("load_model: unsupported format version");
  }
  const std::uint32_t header_len = get_u32(bytes.data() + 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(header_len)) {
    throw Error("load_model: truncated header");
  }
  const json header = json::parse(bytes.substr(12, header_len));

  NetworkConfig cfg;
  cfg.channels = header.at("channels").get<std::vector<std::size_t>>();
  cfg.kernel_size = header.at("kernel_size").get<std::size_t>();
  cfg.pool_size = header.at("pool_size").get<std::size_t>();
  cfg.dense_width = header.at("dense_width").get<std::size_t>();
  cfg.dropout_keep = header.at("dropout_keep").get<double>();
  cfg.bn_epsilon = header.at("bn_epsilon").get<double>();
  cfg.bn_momentum = header.at("bn_momentum").get<double>();
  cfg.leaky_slope = header.at("leaky_slope").get<double>();

  NetworkParameters params = init_parameters(cfg, 0);
  params.init_seed = header.value("seed", std::uint64_t{0});

  std::size_t offset = 12 + header_len;
  std::size_t tensor_index = 0;
  const json& tensors = header.at("tensors");
  visit_all_tensors(params, [&](const std::string& name, std::vector<double>& t) {
    if (tensor_index >= tensors.size() ||
        tensors[tensor_index].at("name").get<std::string>() != name ||
        tensors[tensor_index].at("size").get<std::size_t>() != t.size()) {
      throw Error("load_model: tensor manifest mismatch at '" + name + "'");
    }
    ++tensor_index;
    if (offset + 8 * t.size() > bytes.size()) throw Error("load_model: truncated tensor data");
    for (double& v : t) {
      v = get_f64le(bytes.data() + offset);
      offset += 8;
    }
  });
  if (offset != bytes.size()) throw Error("load_model: trailing bytes after tensor data");
  return params;
}

}  // namespace accelcal
