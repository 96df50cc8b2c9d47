#include "accelcal/calib_ls.hpp"

#include <cmath>
#include <stdexcept>

#include "accelcal/errors.hpp"

namespace accelcal {

LsProblem make_per_sample_problem(const std::vector<Vec3>& samples, double g) {
  if (!(g > 0.0)) throw std::invalid_argument("make_per_sample_problem: g must be positive");
  return {samples, g};
}

LsProblem make_pose_mean_problem(const std::vector<std::vector<Vec3>>& poses, double g) {
  if (!(g > 0.0)) throw std::invalid_argument("make_pose_mean_problem: g must be positive");
  LsProblem p;
  p.g = g;
  p.measurements.reserve(poses.size());
  for (const auto& pose : poses) {
    if (pose.empty()) throw std::invalid_argument("make_pose_mean_problem: empty pose");
    Vec3 sum{};
    for (const Vec3& s : pose) sum += s;
    p.measurements.push_back(sum / static_cast<double>(pose.size()));
  }
  return p;
}

std::vector<double> residuals(const LsProblem& problem, const BiasVector& bias) {
  std::vector<double> r;
  r.reserve(problem.measurements.size());
  for (const Vec3& f : problem.measurements) r.push_back(norm(f - bias) - problem.g);
  return r;
}

double cost(const LsProblem& problem, const BiasVector& bias) {
  double c = 0.0;
  for (const Vec3& f : problem.measurements) {
    const double r = norm(f - bias) - problem.g;
    c += r * r;
  }
  return c;
}

std::vector<Vec3> jacobian(const LsProblem& problem, const BiasVector& bias) {
  std::vector<Vec3> rows;
  rows.reserve(problem.measurements.size());
  for (const Vec3& f : problem.measurements) {
    const Vec3 d = f - bias;
    const double n = norm(d);
    if (n <= 1e-12) {
      throw SingularResidualError("jacobian: measurement coincides with the bias estimate");
    }
    rows.push_back(-1.0 / n * d);
  }
  return rows;
}

namespace {

struct QuadraticModel {
  Vec3 grad;   // gradient of sum of squared residuals: 2 J^T r
  Mat3 jtj;    // J^T J
  bool gauss_newton_ok = false;
  Vec3 gauss_newton_step{};
};

QuadraticModel build_model(const LsProblem& problem, const BiasVector& bias) {
  QuadraticModel m;
  const auto r = residuals(problem, bias);
  const auto j = jacobian(problem, bias);
  Vec3 jtr{};
  for (std::size_t i = 0; i < r.size(); ++i) {
    jtr += r[i] * j[i];
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b) m.jtj(a, b) += j[i][a] * j[i][b];
  }
  m.grad = 2.0 * jtr;
  m.gauss_newton_ok = solve3x3(m.jtj, -1.0 * jtr, m.gauss_newton_step, 1e-12);
  return m;
}

/// Dogleg step of at most `radius`, blending the steepest-descent (Cauchy)
/// point with the Gauss-Newton point. Falls back to the truncated Cauchy
/// direction when J^T J is singular (under-determined geometry).
Vec3 dogleg_step(const QuadraticModel& m, double radius) {
  const Vec3& g = m.grad;
  const double gnorm2 = dot(g, g);
  if (gnorm2 == 0.0) return {};

  // Curvature of the model along -g; B = 2 J^T J.
  const double gbg = 2.0 * dot(g, m.jtj * g);
  Vec3 cauchy;
  if (gbg > 0.0) {
    cauchy = -(gnorm2 / gbg) * g;
  } else {
    cauchy = -(radius / std::sqrt(gnorm2)) * g;
  }

  if (!m.gauss_newton_ok) {
    const double cn = norm(cauchy);
    return cn <= radius ? cauchy : (radius / cn) * cauchy;
  }

  const Vec3& gn = m.gauss_newton_step;
  if (norm(gn) <= radius) return gn;

  const double cn = norm(cauchy);
  if (cn >= radius) return (radius / cn) * cauchy;

  // Walk the leg from the Cauchy point toward the Gauss-Newton point until
  // the trust-region boundary: solve |c + tau (gn - c)| = radius.
  const Vec3 d = gn - cauchy;
  const double a = dot(d, d);
  const double b = 2.0 * dot(cauchy, d);
  const double c = dot(cauchy, cauchy) - radius * radius;
  const double disc = std::max(0.0, b * b - 4.0 * a * c);
  const double tau = (-b + std::sqrt(disc)) / (2.0 * a);
  return cauchy + tau * d;
}

}  // namespace

CalibrationResult solve_trf(const LsProblem& problem, const TrustRegionConfig& config,
                            const BiasVector& initial_bias,
                            std::vector<double>* accepted_costs) {
  if (problem.measurements.empty()) {
    throw std::invalid_argument("solve_trf: problem has no measurements");
  }
  for (const Vec3& f : problem.measurements) {
    if (!all_finite(f)) throw std::invalid_argument("solve_trf: non-finite measurement");
  }
  if (!(problem.g > 0.0)) throw std::invalid_argument("solve_trf: g must be positive");

  CalibrationResult result;
  result.bias = initial_bias;
  double current_cost = cost(problem, result.bias);
  double radius = config.initial_radius;

  for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
    result.iterations = iter + 1;
    const QuadraticModel model = build_model(problem, result.bias);

    if (norm(model.grad) <= config.tol_gradient) {
      result.converged = true;
      break;
    }

    const Vec3 step = dogleg_step(model, radius);
    const double step_norm = norm(step);
    const double predicted =
        -(dot(model.grad, step) + dot(step, model.jtj * step));
    const double trial_cost = cost(problem, result.bias + step);
    const double actual = current_cost - trial_cost;

    if (predicted <= 0.0) {
      radius *= config.shrink_factor;
      if (radius < 1e-300) break;
      continue;
    }

    const double rho = actual / predicted;
    if (rho >= config.eta_accept) {
      result.bias += step;
      current_cost = trial_cost;
      if (accepted_costs) accepted_costs->push_back(current_cost);
      if (step_norm <= config.tol_step) {
        result.converged = true;
        break;
      }
    }
    if (rho < 0.25) {
      radius *= config.shrink_factor;
    } else if (rho > 0.75 && step_norm >= 0.99 * radius) {
      radius = std::min(config.grow_factor * radius, config.max_radius);
    }
    if (radius < 1e-300) break;
  }

  result.final_cost = current_cost;
  if (!result.converged) {
    // Report convergence when the final state satisfies the gradient test
    // even if the loop exhausted its budget on the last refinement.
    try {
      const QuadraticModel model = build_model(problem, result.bias);
      result.converged = norm(model.grad) <= config.tol_gradient;
    } catch (const SingularResidualError&) {
      // A measurement coincides with the final estimate; leave unconverged.
    }
  }
  return result;
}

}  // namespace accelcal
