#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldn/matrix.hpp"

namespace ldn {

enum class SaliencyMode { cls_attention, received_attention, feature_surrogate };

inline const char* to_string(SaliencyMode m) {
  switch (m) {
    case SaliencyMode::cls_attention: return "cls_attention";
    case SaliencyMode::received_attention: return "received_attention";
    case SaliencyMode::feature_surrogate: return "feature_surrogate";
  }
  return "?";
}

// Per-patch importance scores. Scores are non-negative; they are turned into
// sampling distributions later, so they need not sum to one here.
struct SaliencyScores {
  std::vector<double> scores;
  SaliencyMode mode = SaliencyMode::feature_surrogate;
};

namespace detail {
// Attention stacks are one matrix per head with row-stochastic rows.
inline void check_attention(const std::vector<Matrix>& heads, std::size_t side,
                            const char* where) {
  if (heads.empty()) throw std::invalid_argument(std::string(where) + ": no heads");
  for (const Matrix& a : heads) {
    if (a.rows != side || a.cols != side)
      throw std::invalid_argument(std::string(where) + ": head shape mismatch");
    for (std::size_t r = 0; r < a.rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < a.cols; ++c) {
        const double v = a.at(r, c);
        if (!(v >= 0.0) || !std::isfinite(v))
          throw std::invalid_argument(std::string(where) + ": negative attention weight");
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-6)
        throw std::invalid_argument(std::string(where) + ": row " + std::to_string(r) +
                                    " does not sum to 1");
    }
  }
}
}  // namespace detail

// Class-token attention averaged over heads. Heads are (S+1)x(S+1) with the
// class token at row/column 0; the result has one score per patch.
inline SaliencyScores saliency_from_cls_attention(const std::vector<Matrix>& heads) {
  if (heads.empty() || heads.front().rows < 2)
    throw std::invalid_argument("saliency_from_cls_attention: need class token plus patches");
  const std::size_t side = heads.front().rows;
  detail::check_attention(heads, side, "saliency_from_cls_attention");
  const std::size_t patches = side - 1;
  SaliencyScores out;
  out.mode = SaliencyMode::cls_attention;
  out.scores.assign(patches, 0.0);
  for (const Matrix& a : heads)
    for (std::size_t i = 0; i < patches; ++i) out.scores[i] += a.at(0, i + 1);
  for (double& s : out.scores) s /= static_cast<double>(heads.size());
  return out;
}

// Mean attention each patch receives from every source position, averaged
// over heads. Heads are SxS over patch positions only.
inline SaliencyScores saliency_from_received_attention(const std::vector<Matrix>& heads) {
  if (heads.empty() || heads.front().rows == 0)
    throw std::invalid_argument("saliency_from_received_attention: empty input");
  const std::size_t s_len = heads.front().rows;
  detail::check_attention(heads, s_len, "saliency_from_received_attention");
  SaliencyScores out;
  out.mode = SaliencyMode::received_attention;
  out.scores.assign(s_len, 0.0);
  for (const Matrix& a : heads)
    for (std::size_t j = 0; j < s_len; ++j)
      for (std::size_t i = 0; i < s_len; ++i) out.scores[i] += a.at(j, i);
  const double denom = static_cast<double>(heads.size()) * static_cast<double>(s_len);
  for (double& s : out.scores) s /= denom;
  return out;
}

// Saliency surrogate for encoders without an accessible class token: the
// norm of each centered feature row, rescaled to a probability vector.
// All-identical rows degrade to the uniform distribution rather than error.
inline SaliencyScores saliency_from_features(const Matrix& features) {
  if (features.rows == 0 || features.cols == 0)
    throw std::invalid_argument("saliency_from_features: empty feature matrix");
  ensure_finite(features, "saliency_from_features");
  const std::size_t s_len = features.rows;
  std::vector<double> mean(features.cols, 0.0);
  for (std::size_t r = 0; r < s_len; ++r)
    for (std::size_t c = 0; c < features.cols; ++c) mean[c] += features.at(r, c);
  for (double& m : mean) m /= static_cast<double>(s_len);

  SaliencyScores out;
  out.mode = SaliencyMode::feature_surrogate;
  out.scores.assign(s_len, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < s_len; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < features.cols; ++c) {
      const double d = features.at(r, c) - mean[c];
      sq += d * d;
    }
    out.scores[r] = std::sqrt(sq);
    total += out.scores[r];
  }
  if (total <= 0.0) {
    const double u = 1.0 / static_cast<double>(s_len);
    for (double& s : out.scores) s = u;
  } else {
    for (double& s : out.scores) s /= total;
  }
  return out;
}

}  // namespace ldn
