#pragma once

namespace accelcal {

/// Regularized incomplete beta function I_x(a, b), evaluated by the modified
/// Lentz continued fraction to ~1e-12 relative accuracy.
double regularized_incomplete_beta(double x, double a, double b);

/// CDF of Student's t distribution with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

/// Two-sided p-value for an observed t statistic.
double student_t_two_sided_p(double t, double dof);

/// Upper critical value t such that P(|T| > t) = alpha_two_sided.
/// For alpha 0.05 and 4 dof this is 2.776.
double student_t_critical(double alpha_two_sided, double dof);

}  // namespace accelcal
