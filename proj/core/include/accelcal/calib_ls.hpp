#pragma once

#include <cstddef>
#include <vector>

#include "accelcal/geometry.hpp"
#include "accelcal/signal_model.hpp"

namespace accelcal {

/// Gravity-norm least-squares problem: residual per measurement is
/// |f_i - b| - g, so a stationary accelerometer with the bias removed must
/// read a vector of magnitude g.
struct LsProblem {
  std::vector<Vec3> measurements;  // specific-force samples or pose means
  double g = kStandardGravity;
};

/// Builds a problem with one residual per sample.
LsProblem make_per_sample_problem(const std::vector<Vec3>& samples,
                                  double g = kStandardGravity);

/// Builds a problem with one residual per pose, each pose pre-averaged.
/// Pre-averaging conditions the problem far better than raw samples.
LsProblem make_pose_mean_problem(const std::vector<std::vector<Vec3>>& poses,
                                 double g = kStandardGravity);

struct TrustRegionConfig {
  double initial_radius = 0.1;   // m/s^2
  double max_radius = 10.0;      // m/s^2
  double eta_accept = 0.1;       // model-agreement ratio below which steps are rejected
  double shrink_factor = 0.25;
  double grow_factor = 2.0;
  double tol_gradient = 1e-10;
  double tol_step = 1e-12;
  std::size_t max_iterations = 200;
};

struct CalibrationResult {
  BiasVector bias{};
  std::size_t iterations = 0;
  double final_cost = 0.0;  // sum of squared residuals, (m/s^2)^2
  bool converged = false;
  /// Set when a rank-deficient linear solve fell back to the minimum-norm
  /// solution (iterative method only).
  bool used_min_norm_fallback = false;
};

/// Residual vector r_i = |f_i - b| - g.
std::vector<double> residuals(const LsProblem& problem, const BiasVector& bias);

/// Sum of squared residuals.
double cost(const LsProblem& problem, const BiasVector& bias);

/// Jacobian of the residuals: row i is -(f_i - b)^T / |f_i - b|, a negative
/// unit vector. Throws SingularResidualError when a measurement coincides
/// with the bias estimate (|f_i - b| <= 1e-12).
std::vector<Vec3> jacobian(const LsProblem& problem, const BiasVector& bias);

/// Trust-region (dogleg) Gauss-Newton minimization of the gravity-norm cost,
/// starting from zero bias by default. Steps obey |db| <= radius; the radius
/// shrinks on poor quadratic-model agreement and grows on good agreement.
/// Running out of iterations yields converged=false rather than an error.
/// Throws std::invalid_argument on an empty problem. When given,
/// `accepted_costs` records the cost after every accepted step.
CalibrationResult solve_trf(const LsProblem& problem,
                            const TrustRegionConfig& config = {},
                            const BiasVector& initial_bias = {},
                            std::vector<double>* accepted_costs = nullptr);

}  // namespace accelcal
