#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ldn/matrix.hpp"

namespace ldn {

// Singular values by one-sided Jacobi: plane rotations orthogonalise the
// columns of the tall orientation, then the column norms are the singular
// values. O(n^3) per sweep, which is fine at this project's sizes, and
// accurate to near machine precision for small spectra.
inline std::vector<double> svd_values(const Matrix& m) {
  if (m.rows == 0 || m.cols == 0) throw std::invalid_argument("svd_values: empty matrix");
  ensure_finite(m, "svd_values");
  Matrix a = (m.rows >= m.cols) ? m : transpose(m);
  const std::size_t n = a.cols;

  auto col_dot = [&a](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t r = 0; r < a.rows; ++r) s += a.at(r, i) * a.at(r, j);
    return s;
  };

  const double tol = 1e-28;  // on gamma^2 / (alpha * beta)
  for (int sweep = 0; sweep < 64; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double alpha = col_dot(i, i);
        const double beta = col_dot(j, j);
        const double gamma = col_dot(i, j);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (gamma * gamma <= tol * alpha * beta) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t =
            (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t r = 0; r < a.rows; ++r) {
          const double vi = a.at(r, i);
          const double vj = a.at(r, j);
          a.at(r, i) = c * vi - s * vj;
          a.at(r, j) = s * vi + c * vj;
        }
        rotated = true;
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sv(n);
  for (std::size_t i = 0; i < n; ++i) sv[i] = std::sqrt(col_dot(i, i));
  std::sort(sv.begin(), sv.end(), std::greater<double>());
  return sv;
}

}  // namespace ldn
