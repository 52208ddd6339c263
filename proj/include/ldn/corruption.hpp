#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "ldn/matrix.hpp"
#include "ldn/numerics.hpp"
#include "ldn/rng.hpp"
#include "ldn/saliency.hpp"

namespace ldn {

struct CorruptionConfig {
  double noise_rate = 0.10;     // fraction of patches blended with noise
  double mask_rate = 0.02;      // fraction of patches replaced by the mask token
  double sigma = 1.0;           // noise standard deviation
  double tau_max = 0.15;        // blend strength upper bound
  double saliency_temp = 0.07;  // temperature of the saliency sampling softmax
  std::size_t bins = 8;         // discretisation of the strength range
};

inline void validate(const CorruptionConfig& c) {
  if (!(c.noise_rate >= 0.0) || !(c.mask_rate >= 0.0))
    throw std::invalid_argument("CorruptionConfig: rates must be non-negative");
  if (c.noise_rate + c.mask_rate > 1.0)
    throw std::invalid_argument("CorruptionConfig: rates sum above 1");
  if (!(c.sigma > 0.0)) throw std::invalid_argument("CorruptionConfig: sigma must be positive");
  if (!(c.tau_max > 0.0 && c.tau_max <= 1.0))
    throw std::invalid_argument("CorruptionConfig: tau_max must lie in (0, 1]");
  if (!(c.saliency_temp > 0.0))
    throw std::invalid_argument("CorruptionConfig: saliency_temp must be positive");
  if (c.bins == 0) throw std::invalid_argument("CorruptionConfig: bins must be positive");
}

// Strength bin: floor(tau / tau_max * bins), with tau == tau_max clamped
// into the top bin.
inline std::size_t bin_index(double tau, double tau_max, std::size_t bins) {
  if (!(tau_max > 0.0) || bins == 0)
    throw std::invalid_argument("bin_index: bad tau_max or bins");
  if (!(tau >= 0.0 && tau <= tau_max))
    throw std::domain_error("bin_index: tau outside [0, tau_max]");
  const auto b = static_cast<std::size_t>(tau / tau_max * static_cast<double>(bins));
  return std::min(b, bins - 1);
}

// Trainable lookup tables consumed at corruption time: one embedding that
// replaces masked tokens and one per strength bin added to noised tokens.
struct ConditioningTables {
  std::vector<double> mask_embedding;  // dim
  Matrix noise_level;                  // bins x dim

  static ConditioningTables seeded(std::size_t dim, std::size_t bins, SeededRng& rng,
                                   double init_scale = 0.02) {
    ConditioningTables t;
    t.mask_embedding.resize(dim);
    for (double& v : t.mask_embedding) v = init_scale * rng.gaussian();
    t.noise_level = Matrix(bins, dim);
    for (double& v : t.noise_level.data) v = init_scale * rng.gaussian();
    return t;
  }
};

// A fully materialised corruption decision for one image. Strengths and
// noise vectors are drawn exactly once, here; applying a plan never samples.
struct CorruptionPlan {
  std::vector<std::size_t> noised;          // ascending patch indices
  std::vector<std::size_t> masked;          // ascending, disjoint from noised
  std::vector<double> tau;                  // per noised entry, in [0, tau_max]
  std::vector<std::vector<double>> eps;     // per noised entry, token_dim values
  std::size_t token_dim = 0;
  std::size_t patch_count = 0;

  // Union of noised and masked in ascending order; these positions are the
  // ones decoded and supervised.
  std::vector<std::size_t> corrupted() const {
    std::vector<std::size_t> c;
    c.reserve(noised.size() + masked.size());
    std::merge(noised.begin(), noised.end(), masked.begin(), masked.end(),
               std::back_inserter(c));
    return c;
  }
};

// Two-stage saliency-weighted sampling. The noised set is drawn first from
// softmax(scores / temp) without replacement; the masked set is then drawn
// from softmax(-scores / temp) restricted to the remaining patches. Strength
// and noise draws follow in ascending noised-index order. The call order is
// frozen by golden tests.
inline CorruptionPlan sample_plan(const SaliencyScores& saliency,
                                  const CorruptionConfig& cfg, std::size_t token_dim,
                                  SeededRng& rng) {
  validate(cfg);
  const std::size_t s_len = saliency.scores.size();
  if (s_len == 0) throw std::invalid_argument("sample_plan: empty saliency");
  if (token_dim == 0) throw std::invalid_argument("sample_plan: token_dim must be positive");
  for (double s : saliency.scores)
    if (!std::isfinite(s)) throw std::invalid_argument("sample_plan: non-finite saliency");

  const auto k_noise = static_cast<std::size_t>(cfg.noise_rate * static_cast<double>(s_len));
  const auto k_mask = static_cast<std::size_t>(cfg.mask_rate * static_cast<double>(s_len));
  if (k_noise + k_mask > s_len)
    throw std::invalid_argument("sample_plan: requested sets exceed patch count");

  CorruptionPlan plan;
  plan.token_dim = token_dim;
  plan.patch_count = s_len;

  if (k_noise > 0) {
    const std::vector<double> w = softmax(saliency.scores, cfg.saliency_temp);
    plan.noised = sample_without_replacement(rng, w, k_noise);
    std::sort(plan.noised.begin(), plan.noised.end());
  }

  if (k_mask > 0) {
    // Complementary preference over the patches not already noised.
    std::vector<double> rem_scores;
    std::vector<std::size_t> rem_index;
    rem_scores.reserve(s_len);
    for (std::size_t i = 0; i < s_len; ++i) {
      if (std::binary_search(plan.noised.begin(), plan.noised.end(), i)) continue;
      rem_scores.push_back(-saliency.scores[i]);
      rem_index.push_back(i);
    }
    const std::vector<double> p = softmax(rem_scores, cfg.saliency_temp);
    std::vector<double> w(s_len, 0.0);
    for (std::size_t k = 0; k < rem_index.size(); ++k) w[rem_index[k]] = p[k];
    plan.masked = sample_without_replacement(rng, w, k_mask);
    std::sort(plan.masked.begin(), plan.masked.end());
  }

  plan.tau.reserve(plan.noised.size());
  plan.eps.reserve(plan.noised.size());
  for (std::size_t i = 0; i < plan.noised.size(); ++i) {
    plan.tau.push_back(rng.uniform(0.0, cfg.tau_max));
    plan.eps.push_back(draw_gaussian(rng, token_dim, cfg.sigma));
  }
  return plan;
}

// Deterministic replay of a plan on projected tokens z (patches x dim).
// Noised rows are blended with their stored noise and tagged with the
// strength-bin embedding; masked rows are replaced by the mask embedding;
// everything else passes through bit-identically.
inline Matrix apply_corruption(const Matrix& z, const CorruptionPlan& plan,
                               const ConditioningTables& tables,
                               const CorruptionConfig& cfg) {
  if (plan.token_dim != z.cols)
    throw std::invalid_argument("apply_corruption: token_dim mismatch");
  if (plan.patch_count != z.rows)
    throw std::invalid_argument("apply_corruption: patch count mismatch");
  if (tables.mask_embedding.size() != z.cols || tables.noise_level.cols != z.cols ||
      tables.noise_level.rows != cfg.bins)
    throw std::invalid_argument("apply_corruption: conditioning table shape mismatch");
  for (std::size_t i : plan.noised)
    if (i >= z.rows) throw std::out_of_range("apply_corruption: noised index out of range");
  for (std::size_t i : plan.masked) {
    if (i >= z.rows) throw std::out_of_range("apply_corruption: masked index out of range");
    if (std::binary_search(plan.noised.begin(), plan.noised.end(), i))
      throw std::invalid_argument("apply_corruption: sets overlap");
  }

  Matrix out = z;
  for (std::size_t k = 0; k < plan.noised.size(); ++k) {
    const std::size_t r = plan.noised[k];
    const double t = plan.tau[k];
    const std::size_t b = bin_index(t, cfg.tau_max, cfg.bins);
    for (std::size_t c = 0; c < z.cols; ++c)
      out.at(r, c) = (1.0 - t) * z.at(r, c) + t * plan.eps[k][c] + tables.noise_level.at(b, c);
  }
  for (std::size_t r : plan.masked)
    for (std::size_t c = 0; c < z.cols; ++c) out.at(r, c) = tables.mask_embedding[c];
  return out;
}

}  // namespace ldn
