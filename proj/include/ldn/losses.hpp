#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ldn/matrix.hpp"
#include "ldn/numerics.hpp"

namespace ldn {

struct Temperatures {
  double relation = 0.10;  // relational distillation softmax
  double contrast = 0.07;  // contrastive softmax
};

struct LossWeights {
  double rec = 0.10;
  double rel = 0.025;
  double con = 0.025;
};

// One latent loss evaluated on the decoded rows, together with its exact
// gradient with respect to those rows. The teacher is a constant: no
// gradient ever flows into it.
struct LatentLoss {
  double value = 0.0;
  Matrix grad;                // same shape as the decoded rows
  bool degenerate = false;    // set when the input was too small to score
};

namespace detail {

struct UnitRows {
  Matrix unit;                // row-normalised copy
  std::vector<double> norm;   // original row norms
};

inline UnitRows unit_rows(const Matrix& m, const char* where) {
  UnitRows out;
  out.unit = Matrix(m.rows, m.cols);
  out.norm.resize(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) s += m.at(r, c) * m.at(r, c);
    const double n = std::sqrt(s);
    if (!(n > kNormEps))
      throw std::domain_error(std::string(where) + ": row " + std::to_string(r) +
                              " has near-zero norm");
    out.norm[r] = n;
    for (std::size_t c = 0; c < m.cols; ++c) out.unit.at(r, c) = m.at(r, c) / n;
  }
  return out;
}

inline void check_pair(const Matrix& yhat, const Matrix& y, const char* where) {
  if (yhat.rows != y.rows || yhat.cols != y.cols)
    throw std::invalid_argument(std::string(where) + ": decoded/target shape mismatch");
  ensure_finite(yhat, where);
  ensure_finite(y, where);
}

}  // namespace detail

// Pairwise cosine similarities of the rows of f: symmetric, entries clamped
// to [-1, 1], diagonal exactly 1.
inline Matrix similarity_matrix(const Matrix& f) {
  if (f.rows == 0 || f.cols == 0)
    throw std::invalid_argument("similarity_matrix: empty input");
  ensure_finite(f, "similarity_matrix");
  const auto ur = detail::unit_rows(f, "similarity_matrix");
  Matrix s = matmul_nt(ur.unit, ur.unit);
  for (double& v : s.data) v = std::clamp(v, -1.0, 1.0);
  for (std::size_t i = 0; i < s.rows; ++i) s.at(i, i) = 1.0;
  return s;
}

// Mean squared distance between unit-normalised decoded and target rows.
inline LatentLoss loss_rec(const Matrix& yhat, const Matrix& y) {
  detail::check_pair(yhat, y, "loss_rec");
  LatentLoss out;
  out.grad = Matrix(yhat.rows, yhat.cols);
  if (yhat.rows == 0) return out;

  const auto su = detail::unit_rows(yhat, "loss_rec(decoded)");
  const auto tu = detail::unit_rows(y, "loss_rec(target)");
  const double inv_c = 1.0 / static_cast<double>(yhat.rows);
  for (std::size_t i = 0; i < yhat.rows; ++i) {
    double sq = 0.0, ut = 0.0;
    for (std::size_t c = 0; c < yhat.cols; ++c) {
      const double d = su.unit.at(i, c) - tu.unit.at(i, c);
      sq += d * d;
      ut += su.unit.at(i, c) * tu.unit.at(i, c);
    }
    out.value += inv_c * sq;
    // d/dyhat of ||u - t||^2 with u = yhat / |yhat|: (2/r) (u (u.t) - t)
    const double coeff = 2.0 * inv_c / su.norm[i];
    for (std::size_t c = 0; c < yhat.cols; ++c)
      out.grad.at(i, c) = coeff * (su.unit.at(i, c) * ut - tu.unit.at(i, c));
  }
  return out;
}

// Relational distillation: per-row KL between the temperature-softmaxed
// teacher similarity rows (reference) and the student rows. Rows include the
// diagonal. Fewer than two rows cannot form relations; that case scores 0
// with the degenerate flag set.
inline LatentLoss loss_rel(const Matrix& yhat, const Matrix& y, double temp) {
  detail::check_pair(yhat, y, "loss_rel");
  if (!(temp > 0.0)) throw std::invalid_argument("loss_rel: temperature must be positive");
  LatentLoss out;
  out.grad = Matrix(yhat.rows, yhat.cols);
  if (yhat.rows < 2) {
    out.degenerate = yhat.rows > 0;
    return out;
  }

  const std::size_t n = yhat.rows;
  const auto su = detail::unit_rows(yhat, "loss_rel(decoded)");
  const Matrix ss = similarity_matrix(yhat);
  const Matrix st = similarity_matrix(y);

  Matrix p(n, n), q(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    auto pi = softmax(st.row_copy(i), temp);
    auto qi = softmax(ss.row_copy(i), temp);
    p.set_row(i, pi);
    q.set_row(i, qi);
    for (std::size_t j = 0; j < n; ++j)
      out.value += pi[j] * (std::log(pi[j]) - std::log(qi[j]));
  }
  const double inv_c = 1.0 / static_cast<double>(n);
  out.value *= inv_c;

  // dL/dS_ij = (q_ij - p_ij) / (n temp); cells (i,j) and (j,i) both hold
  // cos(yhat_i, yhat_j), so their coefficients combine on the pair.
  for (std::size_t i = 0; i < n; ++i) {
    const double ri = su.norm[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;  // the diagonal is constant under normalisation
      const double g = (q.at(i, j) - p.at(i, j) + q.at(j, i) - p.at(j, i)) *
                       inv_c / temp;
      const double cij = ss.at(i, j);
      for (std::size_t c = 0; c < yhat.cols; ++c)
        out.grad.at(i, c) += g * (su.unit.at(j, c) - cij * su.unit.at(i, c)) / ri;
    }
  }
  return out;
}

// Contrastive alignment of each decoded row to its own target against the
// other targets in the corrupted set. Denominators use targets only, so the
// comparison stays one-sided: decoded rows query, targets key.
inline LatentLoss loss_con(const Matrix& yhat, const Matrix& y, double temp) {
  detail::check_pair(yhat, y, "loss_con");
  if (!(temp > 0.0)) throw std::invalid_argument("loss_con: temperature must be positive");
  LatentLoss out;
  out.grad = Matrix(yhat.rows, yhat.cols);
  if (yhat.rows == 0) return out;

  const std::size_t n = yhat.rows;
  const auto su = detail::unit_rows(yhat, "loss_con(decoded)");
  const auto tu = detail::unit_rows(y, "loss_con(target)");
  Matrix a = matmul_nt(su.unit, tu.unit);  // a_ij = cos(yhat_i, y_j)
  for (double& v : a.data) v = std::clamp(v, -1.0, 1.0);

  const double inv_c = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double m = a.at(i, 0) / temp;
    for (std::size_t j = 1; j < n; ++j) m = std::max(m, a.at(i, j) / temp);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(a.at(i, j) / temp - m);
    const double lse = m + std::log(z);
    out.value += inv_c * (lse - a.at(i, i) / temp);

    const double ri = su.norm[i];
    for (std::size_t j = 0; j < n; ++j) {
      const double p_ij = std::exp(a.at(i, j) / temp - lse);
      const double coeff = (p_ij - (i == j ? 1.0 : 0.0)) * inv_c / (temp * ri);
      if (coeff == 0.0) continue;
      for (std::size_t c = 0; c < yhat.cols; ++c)
        out.grad.at(i, c) += coeff * (tu.unit.at(j, c) - a.at(i, j) * su.unit.at(i, c));
    }
  }
  return out;
}

struct AuxLossValues {
  double rec = 0.0;
  double rel = 0.0;
  double con = 0.0;
};

struct LossBreakdown {
  double lang = 0.0;
  double rec = 0.0;
  double rel = 0.0;
  double con = 0.0;
  double whd = 0.0;
  double total = 0.0;
};

// total = lang + whd * (w_rec * rec + w_rel * rel + w_con * con), recorded
// exactly in this composition so the breakdown recomposes bit-for-bit.
inline LossBreakdown total_objective(double lang, const AuxLossValues& aux,
                                     const LossWeights& w, double whd) {
  if (!std::isfinite(lang) || !std::isfinite(aux.rec) || !std::isfinite(aux.rel) ||
      !std::isfinite(aux.con))
    throw std::invalid_argument("total_objective: non-finite loss value");
  if (!(w.rec >= 0.0 && w.rel >= 0.0 && w.con >= 0.0))
    throw std::invalid_argument("total_objective: weights must be non-negative");
  if (!(whd >= 0.0 && whd <= 1.0))
    throw std::invalid_argument("total_objective: whd scale outside [0, 1]");
  LossBreakdown b;
  b.lang = lang;
  b.rec = aux.rec;
  b.rel = aux.rel;
  b.con = aux.con;
  b.whd = whd;
  b.total = lang + whd * (w.rec * aux.rec + w.rel * aux.rel + w.con * aux.con);
  return b;
}

}  // namespace ldn
