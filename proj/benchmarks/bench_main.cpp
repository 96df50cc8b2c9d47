#include <benchmark/benchmark.h>

#include <vector>

#include "accelcal/calib_iterative.hpp"
#include "accelcal/calib_ls.hpp"
#include "accelcal/dataset.hpp"
#include "accelcal/ofbenet.hpp"
#include "accelcal/rng.hpp"
#include "accelcal/signal_model.hpp"

using namespace accelcal;

namespace {

Tensor2 random_window(std::size_t t_len, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Tensor2 w(t_len, 3);
  for (double& v : w.data) v = rng.next_uniform(-10.0, 10.0);
  return w;
}

std::vector<Vec3> six_pose_measurements(std::uint64_t seed) {
  SplitMix64 rng(seed);
  const std::vector<OrientationAngles> poses{{0.0, 0.0, 0.0},  {0.0, 1.2, 0.0},
                                             {0.0, -1.1, 0.0}, {1.3, 0.0, 0.0},
                                             {-1.2, 0.2, 0.0}, {2.8, -0.5, 0.0}};
  std::vector<Vec3> ms;
  for (const auto& pose : poses) {
    ms.push_back(gravity_projection(pose) +
                 Vec3{rng.next_uniform(-0.15, 0.15), rng.next_uniform(-0.15, 0.15),
                      rng.next_uniform(-0.15, 0.15)});
  }
  return ms;
}

void BM_ForwardInference(benchmark::State& state) {
  const NetworkParameters params = init_parameters(NetworkConfig{}, 1);
  const Tensor2 window = random_window(3000, 2);
  for (auto _ : state) {
    auto pred = forward(params, window);
    benchmark::DoNotOptimize(pred);
  }
}
BENCHMARK(BM_ForwardInference);

void BM_TrainingStep(benchmark::State& state) {
  const NetworkParameters params = init_parameters(NetworkConfig{}, 1);
  std::vector<Tensor2> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(random_window(3000, 10 + i));
  const std::vector<Vec3> dy(8, Vec3{0.01, -0.02, 0.005});
  SplitMix64 rng(3);
  for (auto _ : state) {
    auto fwd = forward_batch(params, batch, Mode::kTraining, &rng);
    auto grads = backward(params, fwd.trace, dy);
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(BM_TrainingStep);

void BM_Conv1dBlock2(benchmark::State& state) {
  SplitMix64 rng(4);
  Tensor2 x(749, 8);
  for (double& v : x.data) v = rng.next_uniform(-1, 1);
  std::vector<double> kernel(5 * 8 * 32), bias(32);
  for (double& v : kernel) v = rng.next_uniform(-1, 1);
  for (auto _ : state) {
    auto z = conv1d(x, kernel, bias, 8, 32, 5);
    benchmark::DoNotOptimize(z);
  }
}
BENCHMARK(BM_Conv1dBlock2);

void BM_SolveTrf(benchmark::State& state) {
  const auto ms = six_pose_measurements(5);
  for (auto _ : state) {
    auto r = solve_trf({ms, kStandardGravity});
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_SolveTrf);

void BM_SolveIterative(benchmark::State& state) {
  const auto ms = six_pose_measurements(6);
  for (auto _ : state) {
    auto r = solve_iterative(ms);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_SolveIterative);

void BM_SimulateSegment(benchmark::State& state) {
  for (auto _ : state) {
    auto seg = simulate_segment({0.2, 0.1, 0.0}, {0.05, -0.02, 0.08}, {0.02, 7}, 12000, 150.0);
    benchmark::DoNotOptimize(seg);
  }
}
BENCHMARK(BM_SimulateSegment);

void BM_DetectConvergence(benchmark::State& state) {
  const SignalSegment seg =
      simulate_segment({0, 0, 0}, {0.05, -0.02, 0.08}, {0.02, 8}, 12000, 150.0);
  for (auto _ : state) {
    auto r = detect_convergence(seg, 0);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_DetectConvergence);

}  // namespace

BENCHMARK_MAIN();
