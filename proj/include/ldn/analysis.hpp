#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldn/matrix.hpp"
#include "ldn/svd.hpp"

namespace ldn {

// Layer features captured from a run: each layer holds an N x d matrix pooled
// over the visual positions, rows aligned with the labels.
struct FeatureLayer {
  std::uint32_t index = 0;
  Matrix features;
};

struct FeatureDump {
  std::vector<FeatureLayer> layers;
  std::vector<std::int32_t> labels;
  std::string metadata;
};

inline Matrix center_columns(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (std::size_t c = 0; c < m.cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < m.rows; ++r) mean += m.at(r, c);
    mean /= static_cast<double>(m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) out.at(r, c) = m.at(r, c) - mean;
  }
  return out;
}

// Similarity of two representations of the same rows, invariant to rotation
// and isotropic scaling of either side.
inline double linear_cka(const Matrix& x, const Matrix& y) {
  if (x.rows != y.rows) throw std::invalid_argument("linear_cka: row counts differ");
  if (x.rows < 2) throw std::invalid_argument("linear_cka: need at least 2 rows");
  const Matrix xc = center_columns(x);
  const Matrix yc = center_columns(y);
  const double xx = std::sqrt(frobenius_norm_sq(matmul_tn(xc, xc)));
  const double yy = std::sqrt(frobenius_norm_sq(matmul_tn(yc, yc)));
  if (!(xx > 0.0) || !(yy > 0.0))
    throw std::domain_error("linear_cka: constant matrix (zero after centering)");
  const double xy = frobenius_norm_sq(matmul_tn(xc, yc));
  return std::clamp(xy / (xx * yy), 0.0, 1.0);
}

namespace detail {

inline double safe_cosine_rows(const Matrix& m, const std::vector<double>& norms,
                               std::size_t a, std::size_t b) {
  if (!(norms[a] > 0.0) || !(norms[b] > 0.0)) return 0.0;  // zero rows have no direction
  double d = 0.0;
  for (std::size_t c = 0; c < m.cols; ++c) d += m.at(a, c) * m.at(b, c);
  return d / (norms[a] * norms[b]);
}

}  // namespace detail

// Cross-validated nearest-neighbour classification accuracy. Folds are index
// mod folds, similarity ties go to the smaller index, vote ties to the smaller
// label, so the result is one number, not a distribution.
inline double knn_probe(const Matrix& features, const std::vector<std::int32_t>& labels,
                        std::size_t k = 20, std::size_t folds = 5) {
  const std::size_t n = features.rows;
  if (labels.size() != n) throw std::invalid_argument("knn_probe: label count mismatch");
  if (folds < 2) throw std::invalid_argument("knn_probe: need at least 2 folds");
  if (n < folds) throw std::invalid_argument("knn_probe: need at least one point per fold");
  if (k == 0) throw std::invalid_argument("knn_probe: k must be positive");

  std::vector<double> norms(n);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < features.cols; ++c) s += features.at(r, c) * features.at(r, c);
    norms[r] = std::sqrt(s);
  }

  bool warned = false;
  double accuracy_sum = 0.0;
  for (std::size_t fold = 0; fold < folds; ++fold) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < n; ++i) (i % folds == fold ? test : train).push_back(i);
    std::size_t kf = k;
    if (kf >= train.size()) {
      kf = train.size() - 1;
      if (!warned) {
        std::cerr << "knn_probe: k clamped to " << kf << " (training fold size "
                  << train.size() << ")\n";
        warned = true;
      }
      if (kf == 0) throw std::invalid_argument("knn_probe: training fold too small");
    }

    std::size_t correct = 0;
    std::vector<std::pair<double, std::size_t>> sims(train.size());
    for (const std::size_t q : test) {
      for (std::size_t t = 0; t < train.size(); ++t)
        sims[t] = {detail::safe_cosine_rows(features, norms, q, train[t]), train[t]};
      std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(kf),
                        sims.end(), [](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first > b.first;
                          return a.second < b.second;
                        });
      std::map<std::int32_t, std::size_t> votes;
      for (std::size_t i = 0; i < kf; ++i) ++votes[labels[sims[i].second]];
      std::int32_t best_label = 0;
      std::size_t best_count = 0;
      for (const auto& [label, count] : votes)  // map order: smallest label wins ties
        if (count > best_count) {
          best_count = count;
          best_label = label;
        }
      if (best_label == labels[q]) ++correct;
    }
    accuracy_sum += static_cast<double>(correct) / static_cast<double>(test.size());
  }
  return accuracy_sum / static_cast<double>(folds);
}

// exp of the entropy of the normalized singular-value distribution: counts
// directions weighted by how much of the spectrum they carry.
inline double effective_rank(const Matrix& m) {
  const auto sv = svd_values(m);
  double total = 0.0;
  for (double s : sv) total += s;
  if (!(total > 0.0)) throw std::domain_error("effective_rank: zero matrix");
  double entropy = 0.0;
  for (double s : sv) {
    const double p = s / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

inline std::vector<double> singular_spectrum(const Matrix& m, bool normalize) {
  std::vector<double> sv = svd_values(m);
  if (!(sv.front() > 0.0)) throw std::domain_error("singular_spectrum: zero matrix");
  if (normalize) {
    const double top = sv.front();
    for (double& s : sv) s /= top;
  }
  return sv;
}

// Shannon entropy in nats of an attention distribution.
inline double attention_entropy(const std::vector<double>& weights) {
  if (weights.empty()) throw std::invalid_argument("attention_entropy: empty input");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::domain_error("attention_entropy: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw std::invalid_argument("attention_entropy: weights must sum to 1");
  double h = 0.0;
  for (double w : weights)
    if (w > 0.0) h -= w * std::log(w);
  return h;
}

inline std::vector<double> mean_pool_visual(const Matrix& hidden) {
  if (hidden.rows == 0) throw std::invalid_argument("mean_pool_visual: empty matrix");
  std::vector<double> out(hidden.cols, 0.0);
  for (std::size_t r = 0; r < hidden.rows; ++r)
    for (std::size_t c = 0; c < hidden.cols; ++c) out[c] += hidden.at(r, c);
  for (double& v : out) v /= static_cast<double>(hidden.rows);
  return out;
}

// One analyzed layer; fields not computed by the requested mode stay negative.
struct LayerReport {
  std::uint32_t layer_index = 0;
  double cka = -1.0;
  double knn_accuracy = -1.0;
  double eff_rank = -1.0;
  std::vector<double> spectrum;
};

struct AnalysisReport {
  std::string source;
  std::vector<LayerReport> layers;
};

}  // namespace ldn
