#include "accelcal/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace accelcal {

bool solve3x3(const Mat3& a, const Vec3& b, Vec3& x, double pivot_tol) {
  std::array<std::array<double, 4>, 3> aug{};
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) aug[r][c] = a.m[r][c];
    aug[r][3] = b[r];
  }
  for (std::size_t i = 0; i < 3; ++i) {
    std::size_t pivot = i;
    double max_val = std::abs(aug[i][i]);
    for (std::size_t r = i + 1; r < 3; ++r) {
      if (std::abs(aug[r][i]) > max_val) {
        max_val = std::abs(aug[r][i]);
        pivot = r;
      }
    }
    if (max_val < pivot_tol) return false;
    if (pivot != i) std::swap(aug[i], aug[pivot]);
    for (std::size_t r = i + 1; r < 3; ++r) {
      const double f = aug[r][i] / aug[i][i];
      for (std::size_t c = i; c < 4; ++c) aug[r][c] -= f * aug[i][c];
    }
  }
  for (std::size_t ii = 3; ii-- > 0;) {
    double v = aug[ii][3];
    for (std::size_t c = ii + 1; c < 3; ++c) v -= aug[ii][c] * x[c];
    x[ii] = v / aug[ii][ii];
  }
  return true;
}

void symmetric_eigen3(const Mat3& a, Vec3& values, Mat3& vectors) {
  Mat3 d = a;
  Mat3 v = Mat3::identity();

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = std::abs(d(0, 1)) + std::abs(d(0, 2)) + std::abs(d(1, 2));
    if (off < 1e-300) break;
    for (std::size_t p = 0; p < 2; ++p) {
      for (std::size_t q = p + 1; q < 3; ++q) {
        const double apq = d(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (d(q, q) - d(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < 3; ++k) {
          const double dkp = d(k, p);
          const double dkq = d(k, q);
          d(k, p) = c * dkp - s * dkq;
          d(k, q) = s * dkp + c * dkq;
        }
        for (std::size_t k = 0; k < 3; ++k) {
          const double dpk = d(p, k);
          const double dqk = d(q, k);
          d(p, k) = c * dpk - s * dqk;
          d(q, k) = s * dpk + c * dqk;
        }
        for (std::size_t k = 0; k < 3; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::array<std::size_t, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return d(i, i) > d(j, j); });
  for (std::size_t i = 0; i < 3; ++i) {
    values[i] = d(order[i], order[i]);
    for (std::size_t k = 0; k < 3; ++k) vectors(k, i) = v(k, order[i]);
  }
}

}  // namespace accelcal
