#include "accelcal/signal_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "accelcal/rng.hpp"

namespace accelcal {

namespace {

double wrap_pi(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  return a - std::numbers::pi;
}

}  // namespace

OrientationAngles OrientationAngles::normalized() const {
  double roll = wrap_pi(roll_phi);
  double pitch = wrap_pi(pitch_theta);
  double yaw = wrap_pi(yaw_psi);
  // Fold pitch into [-pi/2, pi/2]; the reflection flips roll and yaw by pi.
  if (pitch > std::numbers::pi / 2.0) {
    pitch = std::numbers::pi - pitch;
    roll = wrap_pi(roll + std::numbers::pi);
    yaw = wrap_pi(yaw + std::numbers::pi);
  } else if (pitch < -std::numbers::pi / 2.0) {
    pitch = -std::numbers::pi - pitch;
    roll = wrap_pi(roll + std::numbers::pi);
    yaw = wrap_pi(yaw + std::numbers::pi);
  }
  return {roll, pitch, yaw};
}

RotationMatrix rotation_matrix(const OrientationAngles& angles) {
  if (!std::isfinite(angles.roll_phi) || !std::isfinite(angles.pitch_theta) ||
      !std::isfinite(angles.yaw_psi)) {
    throw std::invalid_argument("rotation_matrix: non-finite Euler angle");
  }
  const double cphi = std::cos(angles.roll_phi), sphi = std::sin(angles.roll_phi);
  const double cth = std::cos(angles.pitch_theta), sth = std::sin(angles.pitch_theta);
  const double cpsi = std::cos(angles.yaw_psi), spsi = std::sin(angles.yaw_psi);

  RotationMatrix t;
  t.m = {{{cth * cpsi, cth * spsi, -sth},
          {-cphi * spsi + sphi * sth * cpsi, cphi * cpsi + sphi * sth * spsi, sphi * cth},
          {sphi * spsi + cphi * sth * cpsi, -sphi * cpsi + cphi * sth * spsi, cphi * cth}}};
  return t;
}

Vec3 gravity_projection(const OrientationAngles& angles, double g) {
  if (!(g > 0.0)) throw std::invalid_argument("gravity_projection: g must be positive");
  if (!std::isfinite(angles.roll_phi) || !std::isfinite(angles.pitch_theta)) {
    throw std::invalid_argument("gravity_projection: non-finite Euler angle");
  }
  const double cphi = std::cos(angles.roll_phi), sphi = std::sin(angles.roll_phi);
  const double cth = std::cos(angles.pitch_theta), sth = std::sin(angles.pitch_theta);
  return {sth * g, -sphi * cth * g, -cphi * cth * g};
}

SignalSegment simulate_segment(const OrientationAngles& angles, const BiasVector& bias,
                               const NoiseModel& noise, std::size_t n_samples,
                               double sample_rate_hz, double g) {
  if (n_samples < 1) throw std::invalid_argument("simulate_segment: n_samples must be >= 1");
  if (!(sample_rate_hz > 0.0)) {
    throw std::invalid_argument("simulate_segment: sample rate must be positive");
  }
  if (noise.sigma < 0.0) throw std::invalid_argument("simulate_segment: sigma must be >= 0");
  if (!all_finite(bias)) throw std::invalid_argument("simulate_segment: non-finite bias");

  const Vec3 rest = gravity_projection(angles, g) + bias;
  SignalSegment seg;
  seg.sample_rate_hz = sample_rate_hz;
  seg.samples.resize(n_samples, rest);
  if (noise.sigma > 0.0) {
    SplitMix64 rng(noise.seed);
    for (Vec3& s : seg.samples) {
      s.x += noise.sigma * rng.next_gaussian();
      s.y += noise.sigma * rng.next_gaussian();
      s.z += noise.sigma * rng.next_gaussian();
    }
  }
  return seg;
}

Vec3 tilt_induced_error(const OrientationAngles& angles, double g) {
  const Vec3 rotated = gravity_projection(angles, g);
  const Vec3 leveled{0.0, 0.0, -g};
  return {std::abs(rotated.x - leveled.x), std::abs(rotated.y - leveled.y),
          std::abs(rotated.z - leveled.z)};
}

double max_allowable_tilt_deg(double threshold_mg) {
  if (!(threshold_mg > 0.0) || !(threshold_mg < 1000.0)) {
    throw std::invalid_argument("max_allowable_tilt_deg: threshold must be in (0, 1000) mg");
  }
  const double threshold = threshold_mg * kMilliG;

  // Worst tilt-induced error component for a single-axis tilt of `deg`.
  const auto worst_component = [](double deg) {
    const double rad = deg * std::numbers::pi / 180.0;
    const Vec3 pitch_err = tilt_induced_error({0.0, rad, 0.0});
    const Vec3 roll_err = tilt_induced_error({rad, 0.0, 0.0});
    const double a = std::max({pitch_err.x, pitch_err.y, pitch_err.z});
    const double b = std::max({roll_err.x, roll_err.y, roll_err.z});
    return std::max(a, b);
  };

  // The error is monotone in the tilt magnitude on [0, 90], so bisect.
  double lo = 0.0, hi = 90.0;
  if (worst_component(hi) <= threshold) return hi;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (worst_component(mid) <= threshold) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace accelcal
