#include "accelcal/tdist.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace accelcal {

namespace {

/// Continued fraction for the incomplete beta function (modified Lentz).
double beta_continued_fraction(double x, double a, double b) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-15;
  constexpr int kMaxIter = 500;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::invalid_argument("regularized_incomplete_beta: a and b must be positive");
  }
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::invalid_argument("regularized_incomplete_beta: x must be in [0, 1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = a * std::log(x) + b * std::log1p(-x) -
                          (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
  // Use the continued fraction on the rapidly converging side.
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(ln_front) * beta_continued_fraction(x, a, b) / a;
  }
  return 1.0 - std::exp(ln_front) * beta_continued_fraction(1.0 - x, b, a) / b;
}

double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("student_t_cdf: dof must be positive");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * regularized_incomplete_beta(x, 0.5 * dof, 0.5);
  return t >= 0.0 ? 1.0 - tail : tail;
}

double student_t_two_sided_p(double t, double dof) {
  const double x = dof / (dof + t * t);
  return regularized_incomplete_beta(x, 0.5 * dof, 0.5);
}

double student_t_critical(double alpha_two_sided, double dof) {
  if (!(alpha_two_sided > 0.0) || !(alpha_two_sided < 1.0)) {
    throw std::invalid_argument("student_t_critical: alpha must be in (0, 1)");
  }
  double lo = 0.0;
  double hi = 1.0;
  while (student_t_two_sided_p(hi, dof) > alpha_two_sided) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_two_sided_p(mid, dof) > alpha_two_sided) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace accelcal
