#pragma once

#include <cstdint>
#include <vector>

#include "accelcal/geometry.hpp"

namespace accelcal {

/// Standard gravity in m/s^2, the default for every operation that needs g.
inline constexpr double kStandardGravity = 9.80665;

/// Milli-g expressed in m/s^2.
inline constexpr double kMilliG = 1e-3 * kStandardGravity;

/// Body-to-navigation attitude as roll/pitch/yaw Euler angles in radians.
/// Rotation order is yaw about z, then pitch about y, then roll about x.
struct OrientationAngles {
  double roll_phi = 0.0;
  double pitch_theta = 0.0;
  double yaw_psi = 0.0;

  /// Folds the angles into roll/yaw in [-pi, pi] and pitch in [-pi/2, pi/2].
  OrientationAngles normalized() const;
};

using RotationMatrix = Mat3;

/// Per-axis deterministic bias in m/s^2.
using BiasVector = Vec3;

/// Consumer-grade turn-on biases stay well under 1 m/s^2 (~100 mg).
inline bool is_consumer_grade_bias(const BiasVector& b) {
  return all_finite(b) && norm(b) <= 1.0;
}

/// Fixed-rate triaxial specific-force time series in m/s^2.
struct SignalSegment {
  std::vector<Vec3> samples;
  double sample_rate_hz = 150.0;

  std::size_t size() const { return samples.size(); }
};

/// Zero-mean white measurement noise, reproducible under a fixed seed.
struct NoiseModel {
  double sigma = 0.02;
  std::uint64_t seed = 0;
};

/// Body-frame rotation matrix for the given Euler angles.
/// Throws std::invalid_argument on non-finite input.
RotationMatrix rotation_matrix(const OrientationAngles& angles);

/// Specific force sensed by a stationary, bias-free accelerometer at the
/// given attitude: (sin(theta)g, -sin(phi)cos(theta)g, -cos(phi)cos(theta)g).
/// Independent of yaw. Throws std::invalid_argument when g <= 0.
Vec3 gravity_projection(const OrientationAngles& angles, double g = kStandardGravity);

/// Generates a stationary segment: gravity projection plus bias plus
/// iid Gaussian noise per axis. Deterministic under the noise model's seed.
SignalSegment simulate_segment(const OrientationAngles& angles, const BiasVector& bias,
                               const NoiseModel& noise, std::size_t n_samples,
                               double sample_rate_hz = 150.0,
                               double g = kStandardGravity);

/// Component-wise absolute deviation between the rotated stationary output
/// and the leveled output (0, 0, -g). This is the bias-like error a naive
/// leveled calibration commits at the given attitude.
Vec3 tilt_induced_error(const OrientationAngles& angles, double g = kStandardGravity);

/// Largest single-axis tilt, in degrees, whose worst-component tilt-induced
/// error stays at or below the given threshold in milli-g. For 50 mg this is
/// asin(0.05) = 2.866 degrees. Throws std::invalid_argument unless
/// 0 < threshold_mg < 1000.
double max_allowable_tilt_deg(double threshold_mg);

}  // namespace accelcal
