#pragma once

#include <cstddef>
#include <vector>

#include "accelcal/calib_ls.hpp"
#include "accelcal/geometry.hpp"
#include "accelcal/signal_model.hpp"

namespace accelcal {

struct IterativeConfig {
  double tolerance = 1e-9;          // stop when |correction| drops below this
  std::size_t max_iterations = 100;
  /// When the correction system is rank-deficient (e.g. a single
  /// orientation), fall back to the minimum-norm least-squares solution
  /// instead of throwing; the result is flagged.
  bool allow_min_norm_fallback = false;
};

/// Per-iteration diagnostics, filled when requested by solve_iterative.
struct IterativeTrace {
  std::vector<double> correction_norms;
};

/// Gravity-constraint error terms e_i = |f_i - b|^2 - g^2. Zero exactly when
/// the corrected measurement lies on the gravity sphere.
std::vector<double> error_terms(const std::vector<Vec3>& measurements,
                                const BiasVector& bias_estimate, double g = kStandardGravity);

/// One bias-correction step: least-squares solution of the linearized system
/// with rows 2 (f_i - b)^T against the error terms. Throws RankDeficientError
/// (carrying the achieved rank) when fewer than 3 independent directions are
/// observed, unless `allow_min_norm` requests the minimum-norm solution;
/// `used_min_norm` reports which branch ran.
BiasVector correction_step(const std::vector<Vec3>& measurements,
                           const BiasVector& bias_estimate, double g = kStandardGravity,
                           bool allow_min_norm = false, bool* used_min_norm = nullptr);

/// Iterates correction steps from zero bias until the correction magnitude
/// drops below the tolerance or the iteration budget runs out. final_cost is
/// the gravity-norm cost of calib_ls for comparability across methods.
CalibrationResult solve_iterative(const std::vector<Vec3>& measurements,
                                  const IterativeConfig& config = {},
                                  double g = kStandardGravity,
                                  IterativeTrace* trace = nullptr);

}  // namespace accelcal
