#include "accelcal/calib_iterative.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "accelcal/calib_ls.hpp"
#include "accelcal/errors.hpp"
#include "accelcal/rng.hpp"
#include "accelcal/signal_model.hpp"

using namespace accelcal;

namespace {

constexpr double kG = kStandardGravity;

std::vector<Vec3> noiseless_six_pose(const BiasVector& bias) {
  const std::vector<OrientationAngles> poses{{0.0, 0.0, 0.0},  {0.0, 1.2, 0.0},
                                             {0.0, -1.1, 0.0}, {1.3, 0.0, 0.0},
                                             {-1.2, 0.2, 0.0}, {2.8, -0.5, 0.0}};
  std::vector<Vec3> ms;
  for (const auto& pose : poses) ms.push_back(gravity_projection(pose) + bias);
  return ms;
}

}  // namespace

TEST(ErrorTerms, ZeroOnExactGravityNormData) {
  const BiasVector truth{0.04, -0.02, 0.09};
  const auto ms = noiseless_six_pose(truth);
  for (double e : error_terms(ms, truth)) EXPECT_NEAR(e, 0.0, 1e-10);
}

TEST(ErrorTerms, PerturbationIsSecondOrderSmall) {
  const std::vector<Vec3> ms{{0.0, 0.0, -kG}};
  const double eps = 1e-3;
  const auto e = error_terms(ms, {eps, 0.0, 0.0});
  // The g^2 cancellation costs ~1e-14 of absolute accuracy.
  EXPECT_NEAR(e[0], eps * eps, 5e-14);
}

TEST(ErrorTerms, DoubledGravityGivesThreeGSquared) {
  const std::vector<Vec3> ms{{0.0, 0.0, -2.0 * kG}};
  EXPECT_NEAR(error_terms(ms, {})[0], 3.0 * kG * kG, 1e-9);
}

TEST(CorrectionStep, MovesStrictlyTowardTruthOnFullRankData) {
  const BiasVector truth{0.15, -0.1, 0.12};
  const auto ms = noiseless_six_pose(truth);
  BiasVector estimate{};  // far from truth
  const double before = norm(estimate - truth);
  estimate += correction_step(ms, estimate);
  const double after = norm(estimate - truth);
  EXPECT_LT(after, before);
}

TEST(CorrectionStep, ConvergedStateYieldsVanishingCorrection) {
  const BiasVector truth{0.05, 0.03, -0.07};
  const auto ms = noiseless_six_pose(truth);
  const Vec3 cal = correction_step(ms, truth);
  EXPECT_LT(norm(cal), 1e-12);
}

TEST(CorrectionStep, SingleOrientationIsRankDeficient) {
  const std::vector<Vec3> ms(100, gravity_projection({0.3, 0.2, 0.0}));
  try {
    correction_step(ms, {});
    FAIL() << "expected RankDeficientError";
  } catch (const RankDeficientError& e) {
    EXPECT_LT(e.rank(), 3);
    EXPECT_GE(e.rank(), 1);
  }
}

TEST(CorrectionStep, MinNormFallbackIsFlagged) {
  const std::vector<Vec3> ms(10, Vec3{0.0, 0.0, -kG - 0.1});
  bool used = false;
  const Vec3 cal = correction_step(ms, {}, kG, /*allow_min_norm=*/true, &used);
  EXPECT_TRUE(used);
  // The only observed direction is z, so the correction lives there.
  EXPECT_NEAR(cal.x, 0.0, 1e-12);
  EXPECT_NEAR(cal.y, 0.0, 1e-12);
  EXPECT_LT(cal.z, 0.0);
}

TEST(SolveIterative, AgreesWithTrfOracle) {
  const BiasVector truth{0.08, -0.12, 0.05};
  const auto ms = noiseless_six_pose(truth);
  IterativeConfig cfg;
  cfg.tolerance = 1e-10;
  const CalibrationResult it = solve_iterative(ms, cfg);
  EXPECT_TRUE(it.converged);
  EXPECT_LE(it.iterations, 20u);
  EXPECT_NEAR(it.bias.x, truth.x, 1e-8);
  EXPECT_NEAR(it.bias.y, truth.y, 1e-8);
  EXPECT_NEAR(it.bias.z, truth.z, 1e-8);

  const CalibrationResult ls = solve_trf({ms, kG});
  EXPECT_NEAR(it.bias.x, ls.bias.x, 1e-7);
  EXPECT_NEAR(it.bias.y, ls.bias.y, 1e-7);
  EXPECT_NEAR(it.bias.z, ls.bias.z, 1e-7);
}

TEST(SolveIterative, ZeroBiasDataConvergesImmediately) {
  const auto ms = noiseless_six_pose({});
  const CalibrationResult r = solve_iterative(ms);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_LT(norm(r.bias), 1e-10);
}

TEST(SolveIterative, NoisyPoseMeansStayAccurate) {
  // Monte-Carlo over seeds: six poses of 3000 samples at sigma = 0.02,
  // solved on pose means; per-axis error must stay below 0.01.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SplitMix64 rng(derive_seed(seed, "iter-noise"));
    const BiasVector truth{rng.next_uniform(-0.196, 0.196), rng.next_uniform(-0.196, 0.196),
                           rng.next_uniform(-0.196, 0.196)};
    const std::vector<OrientationAngles> poses{{0.0, 0.0, 0.0},  {0.0, 1.2, 0.0},
                                               {0.0, -1.1, 0.0}, {1.3, 0.0, 0.0},
                                               {-1.2, 0.2, 0.0}, {2.8, -0.5, 0.0}};
    std::vector<Vec3> ms;
    for (const auto& pose : poses) {
      Vec3 acc{};
      for (int i = 0; i < 3000; ++i) {
        acc += gravity_projection(pose) + truth +
               Vec3{0.02 * rng.next_gaussian(), 0.02 * rng.next_gaussian(),
                    0.02 * rng.next_gaussian()};
      }
      ms.push_back(acc / 3000.0);
    }
    const CalibrationResult r = solve_iterative(ms);
    ASSERT_TRUE(r.converged);
    EXPECT_LT(std::abs(r.bias.x - truth.x), 0.01);
    EXPECT_LT(std::abs(r.bias.y - truth.y), 0.01);
    EXPECT_LT(std::abs(r.bias.z - truth.z), 0.01);
  }
}

TEST(SolveIterative, FixedPointSatisfiesGravityNorm) {
  const BiasVector truth{0.11, 0.06, -0.14};
  const auto ms = noiseless_six_pose(truth);
  const CalibrationResult r = solve_iterative(ms);
  for (const Vec3& f : ms) {
    EXPECT_NEAR(norm(f - r.bias), kG, 1e-9);
  }
}

TEST(SolveIterative, CorrectionNormsShrinkMonotonically) {
  const BiasVector truth{0.18, -0.15, 0.1};
  const auto ms = noiseless_six_pose(truth);
  IterativeTrace trace;
  IterativeConfig cfg;
  cfg.tolerance = 1e-12;
  solve_iterative(ms, cfg, kG, &trace);
  ASSERT_GE(trace.correction_norms.size(), 2u);
  const std::size_t n = trace.correction_norms.size();
  const std::size_t start = n > 5 ? n - 5 : 1;
  for (std::size_t i = start; i < n; ++i) {
    EXPECT_LE(trace.correction_norms[i], trace.correction_norms[i - 1] + 1e-18);
  }
}

TEST(SolveIterative, RankDeficiencyAtFirstStepThrows) {
  const std::vector<Vec3> ms(64, gravity_projection({0.0, 0.5, 0.0}));
  EXPECT_THROW(solve_iterative(ms), RankDeficientError);
}

TEST(SolveIterative, DeterministicGivenIdenticalInputs) {
  const auto ms = noiseless_six_pose({0.07, 0.01, -0.03});
  const CalibrationResult a = solve_iterative(ms);
  const CalibrationResult b = solve_iterative(ms);
  EXPECT_EQ(a.bias, b.bias);
  EXPECT_EQ(a.iterations, b.iterations);
}
