#include "accelcal/calib_iterative.hpp"

#include <cmath>
#include <stdexcept>

#include "accelcal/errors.hpp"

namespace accelcal {

std::vector<double> error_terms(const std::vector<Vec3>& measurements,
                                const BiasVector& bias_estimate, double g) {
  if (measurements.empty()) throw std::invalid_argument("error_terms: no measurements");
  std::vector<double> e;
  e.reserve(measurements.size());
  for (const Vec3& f : measurements) {
    const Vec3 d = f - bias_estimate;
    e.push_back(dot(d, d) - g * g);
  }
  return e;
}

BiasVector correction_step(const std::vector<Vec3>& measurements,
                           const BiasVector& bias_estimate, double g, bool allow_min_norm,
                           bool* used_min_norm) {
  if (used_min_norm) *used_min_norm = false;
  const auto e = error_terms(measurements, bias_estimate, g);

  // Normal equations of the system [2 (f_i - b)^T] cal = e_i.
  Mat3 ata{};
  Vec3 atb{};
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    const Vec3 row = 2.0 * (measurements[i] - bias_estimate);
    for (std::size_t a = 0; a < 3; ++a) {
      atb[a] += row[a] * e[i];
      for (std::size_t b = 0; b < 3; ++b) ata(a, b) += row[a] * row[b];
    }
  }

  Vec3 eigvals;
  Mat3 eigvecs;
  symmetric_eigen3(ata, eigvals, eigvecs);
  // Eigenvalues of A^T A are squared singular values of A; treat directions
  // below a relative floor as unobserved.
  const double floor = std::max(eigvals[0], 0.0) * 1e-12;
  int rank = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (eigvals[i] > floor && eigvals[i] > 0.0) ++rank;
  }

  if (rank < 3 && !allow_min_norm) {
    throw RankDeficientError(
        "correction_step: measurements span fewer than 3 directions", rank);
  }
  if (rank < 3 && used_min_norm) *used_min_norm = true;

  // Minimum-norm solution over the observed subspace (exact solve at rank 3).
  Vec3 cal{};
  for (std::size_t i = 0; i < static_cast<std::size_t>(rank); ++i) {
    const Vec3 v{eigvecs(0, i), eigvecs(1, i), eigvecs(2, i)};
    cal += (dot(v, atb) / eigvals[i]) * v;
  }
  return cal;
}

CalibrationResult solve_iterative(const std::vector<Vec3>& measurements,
                                  const IterativeConfig& config, double g,
                                  IterativeTrace* trace) {
  if (measurements.empty()) throw std::invalid_argument("solve_iterative: no measurements");
  if (!(config.tolerance > 0.0) || config.max_iterations < 1) {
    throw std::invalid_argument("solve_iterative: invalid config");
  }

  CalibrationResult result;
  for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
    bool used_min_norm = false;
    const Vec3 cal = correction_step(measurements, result.bias, g,
                                     config.allow_min_norm_fallback, &used_min_norm);
    result.used_min_norm_fallback = result.used_min_norm_fallback || used_min_norm;
    result.bias += cal;
    result.iterations = iter + 1;
    const double cal_norm = norm(cal);
    if (trace) trace->correction_norms.push_back(cal_norm);
    if (cal_norm < config.tolerance) {
      result.converged = true;
      break;
    }
  }

  result.final_cost = cost({measurements, g}, result.bias);
  return result;
}

}  // namespace accelcal
