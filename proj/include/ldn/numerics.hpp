#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldn/matrix.hpp"

namespace ldn {

// Norm guard for unit normalisation.
inline constexpr double kNormEps = 1e-12;
// Floor inside KL log arguments; a safety net for softmax underflow only.
// Structural zeros in the second argument still raise.
inline constexpr double kKlEps = 1e-12;

// Temperature softmax with max-subtraction. Output sums to 1 within 1e-12.
inline std::vector<double> softmax(const std::vector<double>& v, double temperature) {
  if (v.empty()) throw std::invalid_argument("softmax: empty input");
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax: temperature must be positive");
  double m = v[0];
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("softmax: non-finite input");
    m = std::max(m, x);
  }
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp((v[i] - m) / temperature);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

inline std::vector<double> l2_normalize(const std::vector<double>& v) {
  const double n = norm2(v);
  if (!(n > kNormEps))
    throw std::domain_error("l2_normalize: vector norm " + std::to_string(n) +
                            " is below " + std::to_string(kNormEps));
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

// Row-wise unit normalisation; the error names the offending row.
inline Matrix normalize_rows(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) s += m.at(r, c) * m.at(r, c);
    const double n = std::sqrt(s);
    if (!(n > kNormEps))
      throw std::domain_error("normalize_rows: row " + std::to_string(r) +
                              " has near-zero norm");
    for (std::size_t c = 0; c < m.cols; ++c) out.at(r, c) = m.at(r, c) / n;
  }
  return out;
}

// Cosine similarity clamped to [-1, 1].
inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: size mismatch");
  const double na = norm2(a);
  const double nb = norm2(b);
  if (!(na > kNormEps) || !(nb > kNormEps))
    throw std::domain_error("cosine: zero-norm input");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

// KL(p || q) in nats with the 0 log 0 = 0 convention. Both inputs must be
// probability vectors (sum 1 within 1e-9). q must carry mass wherever p
// does; an exact zero there is a support violation.
inline double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  if (p.empty()) throw std::invalid_argument("kl_divergence: empty input");
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0 || !std::isfinite(p[i]) || !std::isfinite(q[i]))
      throw std::invalid_argument("kl_divergence: entries must be finite and non-negative");
    sp += p[i];
    sq += q[i];
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
    throw std::invalid_argument("kl_divergence: inputs must sum to 1 within 1e-9");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0)
      throw std::domain_error("kl_divergence: support violation at index " +
                              std::to_string(i));
    kl += p[i] * std::log(p[i] / std::max(q[i], kKlEps));
  }
  return kl;
}

}  // namespace ldn
