#include "accelcal/signal_model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "accelcal/rng.hpp"

using namespace accelcal;

namespace {

constexpr double kPi = std::numbers::pi;

OrientationAngles random_angles(SplitMix64& rng) {
  return {rng.next_uniform(-kPi, kPi), rng.next_uniform(-kPi / 2, kPi / 2),
          rng.next_uniform(-kPi, kPi)};
}

}  // namespace

TEST(RotationMatrix, IdentityAtZeroAngles) {
  const RotationMatrix r = rotation_matrix({0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_DOUBLE_EQ(r(i, j), i == j ? 1.0 : 0.0);
    }
  }
}

TEST(RotationMatrix, QuarterPitchRows) {
  const RotationMatrix r = rotation_matrix({0.0, kPi / 2, 0.0});
  EXPECT_NEAR(r(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(r(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(r(0, 2), -1.0, 1e-15);
  EXPECT_NEAR(r(2, 0), 1.0, 1e-15);
  EXPECT_NEAR(r(2, 1), 0.0, 1e-15);
  EXPECT_NEAR(r(2, 2), 0.0, 1e-15);
}

TEST(RotationMatrix, OrthonormalWithUnitDeterminant) {
  SplitMix64 rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    const RotationMatrix r = rotation_matrix(random_angles(rng));
    const Mat3 rtr = transpose(r) * r;
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_NEAR(rtr(i, j), i == j ? 1.0 : 0.0, 1e-12);
      }
    }
    EXPECT_NEAR(determinant(r), 1.0, 1e-12);
  }
}

TEST(RotationMatrix, RejectsNonFiniteAngles) {
  EXPECT_THROW(rotation_matrix({std::nan(""), 0.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(rotation_matrix({0.0, INFINITY, 0.0}), std::invalid_argument);
}

TEST(GravityProjection, LeveledCase) {
  const Vec3 f = gravity_projection({0.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(f.x, 0.0);
  EXPECT_DOUBLE_EQ(f.y, 0.0);
  EXPECT_DOUBLE_EQ(f.z, -kStandardGravity);
}

TEST(GravityProjection, NoseDownPutsGravityOnX) {
  const Vec3 f = gravity_projection({0.0, kPi / 2, 0.0});
  EXPECT_NEAR(f.x, kStandardGravity, 1e-12);
  EXPECT_NEAR(f.y, 0.0, 1e-12);
  EXPECT_NEAR(f.z, 0.0, 1e-12);
}

TEST(GravityProjection, MatchesRotationMatrixPath) {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const OrientationAngles a = random_angles(rng);
    const Vec3 direct = gravity_projection(a);
    const Vec3 via_matrix = rotation_matrix(a) * Vec3{0.0, 0.0, -kStandardGravity};
    EXPECT_NEAR(direct.x, via_matrix.x, 1e-12);
    EXPECT_NEAR(direct.y, via_matrix.y, 1e-12);
    EXPECT_NEAR(direct.z, via_matrix.z, 1e-12);
  }
}

TEST(GravityProjection, NormIsGAndYawDropsOut) {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    OrientationAngles a = random_angles(rng);
    const Vec3 f = gravity_projection(a, kStandardGravity);
    EXPECT_NEAR(norm(f), kStandardGravity, 1e-9);
    OrientationAngles b = a;
    b.yaw_psi = rng.next_uniform(-kPi, kPi);
    const Vec3 g = gravity_projection(b);
    EXPECT_DOUBLE_EQ(f.x, g.x);
    EXPECT_DOUBLE_EQ(f.y, g.y);
    EXPECT_DOUBLE_EQ(f.z, g.z);
  }
}

TEST(GravityProjection, RejectsNonPositiveG) {
  EXPECT_THROW(gravity_projection({0, 0, 0}, 0.0), std::invalid_argument);
  EXPECT_THROW(gravity_projection({0, 0, 0}, -9.8), std::invalid_argument);
}

TEST(SimulateSegment, NoiselessLeveledWithBias) {
  const SignalSegment seg =
      simulate_segment({0, 0, 0}, {0.1, 0.0, 0.0}, {0.0, 123}, 10, 150.0);
  ASSERT_EQ(seg.size(), 10u);
  for (const Vec3& s : seg.samples) {
    EXPECT_DOUBLE_EQ(s.x, 0.1);
    EXPECT_DOUBLE_EQ(s.y, 0.0);
    EXPECT_DOUBLE_EQ(s.z, -kStandardGravity);
  }
}

TEST(SimulateSegment, SampleMeanTracksGravityPlusBias) {
  const std::size_t n = 12000;
  const double sigma = 0.02;
  const OrientationAngles pose{0.4, -0.3, 1.1};
  const BiasVector bias{0.05, -0.08, 0.12};
  const SignalSegment seg = simulate_segment(pose, bias, {sigma, 99}, n, 150.0);
  const Vec3 expected = gravity_projection(pose) + bias;
  Vec3 mean{};
  for (const Vec3& s : seg.samples) mean += s;
  mean = mean / static_cast<double>(n);
  const double tol = 5.0 * sigma / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(mean.x, expected.x, tol);
  EXPECT_NEAR(mean.y, expected.y, tol);
  EXPECT_NEAR(mean.z, expected.z, tol);
}

TEST(SimulateSegment, SameSeedBitIdentical) {
  const SignalSegment a = simulate_segment({0.2, 0.1, 0.0}, {0.01, 0.02, 0.03},
                                           {0.02, 2024}, 500, 150.0);
  const SignalSegment b = simulate_segment({0.2, 0.1, 0.0}, {0.01, 0.02, 0.03},
                                           {0.02, 2024}, 500, 150.0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.samples[i], b.samples[i]);
  }
}

TEST(SimulateSegment, NoiselessMinusBiasIsConstantGravityRow) {
  const OrientationAngles pose{-0.7, 0.5, 0.3};
  const BiasVector bias{0.02, -0.05, 0.09};
  const SignalSegment seg = simulate_segment(pose, bias, {0.0, 0}, 64, 150.0);
  const Vec3 grav = gravity_projection(pose);
  for (const Vec3& s : seg.samples) {
    const Vec3 d = s - bias;
    EXPECT_DOUBLE_EQ(d.x, grav.x);
    EXPECT_DOUBLE_EQ(d.y, grav.y);
    EXPECT_DOUBLE_EQ(d.z, grav.z);
  }
}

TEST(TiltInducedError, ZeroAtLevelAndEven) {
  const Vec3 e0 = tilt_induced_error({0, 0, 0});
  EXPECT_DOUBLE_EQ(e0.x + e0.y + e0.z, 0.0);
  SplitMix64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const double roll = rng.next_uniform(-0.3, 0.3);
    const double pitch = rng.next_uniform(-0.3, 0.3);
    const Vec3 plus = tilt_induced_error({roll, pitch, 0.0});
    const Vec3 minus = tilt_induced_error({-roll, -pitch, 0.0});
    EXPECT_NEAR(plus.x, minus.x, 1e-12);
    EXPECT_NEAR(plus.y, minus.y, 1e-12);
    EXPECT_NEAR(plus.z, minus.z, 1e-12);
  }
}

TEST(TiltInducedError, FiftyMilliGAtThresholdAngle) {
  const double theta = 2.866 * kPi / 180.0;
  const Vec3 e = tilt_induced_error({0.0, theta, 0.0});
  EXPECT_NEAR(e.x, kStandardGravity * std::sin(theta), 1e-12);
  EXPECT_NEAR(e.x, 0.4903, 5e-4);  // ~50 mg
}

TEST(TiltInducedError, MonotoneNearOrigin) {
  // Worst error component grows with |pitch| and |roll| on a grid in
  // [-10, 10] degrees.
  const auto worst = [](double roll_deg, double pitch_deg) {
    const Vec3 e =
        tilt_induced_error({roll_deg * kPi / 180.0, pitch_deg * kPi / 180.0, 0.0});
    return std::max({e.x, e.y, e.z});
  };
  for (int step = 0; step < 10; ++step) {
    EXPECT_LT(worst(0.0, step), worst(0.0, step + 1.0));
    EXPECT_LT(worst(step, 0.0), worst(step + 1.0, 0.0));
    EXPECT_LT(worst(step, step), worst(step + 1.0, step + 1.0));
  }
}

TEST(MaxAllowableTilt, FiftyMilliG) {
  const double deg = max_allowable_tilt_deg(50.0);
  EXPECT_NEAR(deg, 2.87, 0.01);
  // Analytic oracle: the worst single-axis component is g sin(tilt).
  EXPECT_NEAR(deg, std::asin(0.05) * 180.0 / kPi, 1e-6);
}

TEST(MaxAllowableTilt, HundredMilliGMatchesArcsin) {
  EXPECT_NEAR(max_allowable_tilt_deg(100.0), std::asin(0.1) * 180.0 / kPi, 1e-6);
  EXPECT_NEAR(max_allowable_tilt_deg(100.0), 5.74, 0.01);
}

TEST(MaxAllowableTilt, VanishesWithTheThreshold) {
  EXPECT_LT(max_allowable_tilt_deg(1e-6), 1e-3);
  EXPECT_THROW(max_allowable_tilt_deg(0.0), std::invalid_argument);
  EXPECT_THROW(max_allowable_tilt_deg(1000.0), std::invalid_argument);
}

TEST(OrientationAngles, NormalizationRanges) {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const OrientationAngles raw{rng.next_uniform(-10.0, 10.0), rng.next_uniform(-10.0, 10.0),
                                rng.next_uniform(-10.0, 10.0)};
    const OrientationAngles n = raw.normalized();
    EXPECT_GE(n.roll_phi, -kPi);
    EXPECT_LE(n.roll_phi, kPi);
    EXPECT_GE(n.pitch_theta, -kPi / 2);
    EXPECT_LE(n.pitch_theta, kPi / 2);
    EXPECT_GE(n.yaw_psi, -kPi);
    EXPECT_LE(n.yaw_psi, kPi);
    // Normalization must not change the attitude itself.
    const Vec3 a = gravity_projection(raw);
    const Vec3 b = gravity_projection(n);
    EXPECT_NEAR(a.x, b.x, 1e-9);
    EXPECT_NEAR(a.y, b.y, 1e-9);
    EXPECT_NEAR(a.z, b.z, 1e-9);
  }
}

TEST(BiasVector, ConsumerGradeValidation) {
  EXPECT_TRUE(is_consumer_grade_bias({0.196, -0.196, 0.196}));
  EXPECT_FALSE(is_consumer_grade_bias({1.2, 0.0, 0.0}));
  EXPECT_FALSE(is_consumer_grade_bias({std::nan(""), 0.0, 0.0}));
}
