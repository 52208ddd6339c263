#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ldn/analysis.hpp"
#include "ldn/matrix.hpp"
#include "ldn/rng.hpp"
#include "ldn/svd.hpp"

namespace {

ldn::Matrix random_matrix(std::size_t rows, std::size_t cols, ldn::SeededRng& rng) {
  ldn::Matrix m(rows, cols);
  for (double& v : m.data) v = rng.gaussian();
  return m;
}

// Same quantity as linear_cka, but computed through Gram matrices:
// CKA = tr(K H L H) / sqrt(tr(K H K H) tr(L H L H)) with K = X X^T and
// H the centering matrix. Shares no code with the production path.
double gram_hsic_cka(const ldn::Matrix& x, const ldn::Matrix& y) {
  const std::size_t n = x.rows;
  ldn::Matrix h(n, n, -1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) h.at(i, i) += 1.0;
  const ldn::Matrix k = ldn::matmul_nt(x, x);
  const ldn::Matrix l = ldn::matmul_nt(y, y);
  auto hsic = [&](const ldn::Matrix& a, const ldn::Matrix& b) {
    const ldn::Matrix prod = ldn::matmul(ldn::matmul(a, h), ldn::matmul(b, h));
    double tr = 0.0;
    for (std::size_t i = 0; i < n; ++i) tr += prod.at(i, i);
    return tr;
  };
  return hsic(k, l) / std::sqrt(hsic(k, k) * hsic(l, l));
}

// Gram-Schmidt on random columns. Result satisfies R^T R = I.
ldn::Matrix random_orthogonal(std::size_t d, ldn::SeededRng& rng) {
  ldn::Matrix r = random_matrix(d, d, rng);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      double proj = 0.0;
      for (std::size_t i = 0; i < d; ++i) proj += r.at(i, c) * r.at(i, p);
      for (std::size_t i = 0; i < d; ++i) r.at(i, c) -= proj * r.at(i, p);
    }
    double nrm = 0.0;
    for (std::size_t i = 0; i < d; ++i) nrm += r.at(i, c) * r.at(i, c);
    nrm = std::sqrt(nrm);
    for (std::size_t i = 0; i < d; ++i) r.at(i, c) /= nrm;
  }
  return r;
}

ldn::Matrix diag_matrix(const std::vector<double>& d) {
  ldn::Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m.at(i, i) = d[i];
  return m;
}

}  // namespace

TEST_CASE("linear CKA matches the Gram/HSIC formulation") {
  ldn::SeededRng rng(2024, "cka-oracle");
  for (int trial = 0; trial < 20; ++trial) {
    const ldn::Matrix x = random_matrix(20, 3, rng);
    const ldn::Matrix y = random_matrix(20, 5, rng);
    const double fast = ldn::linear_cka(x, y);
    const double oracle = gram_hsic_cka(x, y);
    REQUIRE(std::fabs(fast - oracle) <= 1e-10);
  }
}

TEST_CASE("CKA of a matrix with itself is one") {
  ldn::SeededRng rng(7, "cka-self");
  for (int trial = 0; trial < 5; ++trial) {
    const ldn::Matrix x = random_matrix(20, 4, rng);
    REQUIRE(std::fabs(ldn::linear_cka(x, x) - 1.0) <= 1e-12);
  }
}

TEST_CASE("CKA is symmetric") {
  ldn::SeededRng rng(11, "cka-sym");
  const ldn::Matrix x = random_matrix(16, 3, rng);
  const ldn::Matrix y = random_matrix(16, 6, rng);
  REQUIRE(std::fabs(ldn::linear_cka(x, y) - ldn::linear_cka(y, x)) <= 1e-12);
}

TEST_CASE("CKA is invariant to orthogonal maps and isotropic scaling") {
  ldn::SeededRng rng(13, "cka-invariance");
  const ldn::Matrix x = random_matrix(20, 4, rng);
  const ldn::Matrix y = random_matrix(20, 4, rng);
  const double base = ldn::linear_cka(x, y);

  const ldn::Matrix r = random_orthogonal(4, rng);
  const double rotated = ldn::linear_cka(ldn::matmul(x, r), y);
  REQUIRE(std::fabs(rotated - base) <= 1e-10);

  const double scaled = ldn::linear_cka(ldn::scale(x, 3.7), ldn::scale(y, 0.2));
  REQUIRE(std::fabs(scaled - base) <= 1e-10);
}

TEST_CASE("CKA rejects degenerate input") {
  const ldn::Matrix constant(8, 3, 2.5);
  ldn::SeededRng rng(17, "cka-degenerate");
  const ldn::Matrix ok = random_matrix(8, 3, rng);
  REQUIRE_THROWS_AS(ldn::linear_cka(constant, ok), std::domain_error);
  REQUIRE_THROWS_AS(ldn::linear_cka(ok, constant), std::domain_error);

  const ldn::Matrix tall = random_matrix(9, 3, rng);
  REQUIRE_THROWS_AS(ldn::linear_cka(tall, ok), std::invalid_argument);
  const ldn::Matrix single = random_matrix(1, 3, rng);
  REQUIRE_THROWS_AS(ldn::linear_cka(single, single), std::invalid_argument);
}

TEST_CASE("kNN probe separates well-spaced blobs perfectly") {
  ldn::SeededRng rng(100, "knn-blobs");
  const std::size_t per_class = 100;
  const double centers[3][4] = {
      {30.0, 0.0, 0.0, 0.0}, {0.0, 30.0, 0.0, 0.0}, {0.0, 0.0, 30.0, 0.0}};
  ldn::Matrix feats(3 * per_class, 4);
  std::vector<std::int32_t> labels(3 * per_class);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      const std::size_t row = c * per_class + i;
      for (std::size_t d = 0; d < 4; ++d)
        feats.at(row, d) = centers[c][d] + rng.gaussian();
      labels[row] = static_cast<std::int32_t>(c);
    }
  }
  REQUIRE(ldn::knn_probe(feats, labels) == 1.0);
}

TEST_CASE("kNN probe on random labels sits at chance") {
  ldn::SeededRng rng(200, "knn-chance");
  const std::size_t n = 400;
  ldn::Matrix feats = random_matrix(n, 8, rng);
  std::vector<std::int32_t> labels(n);
  for (auto& l : labels) l = static_cast<std::int32_t>(rng.next_u64() % 4);
  const double acc = ldn::knn_probe(feats, labels);
  REQUIRE(acc >= 0.25 - 0.06);
  REQUIRE(acc <= 0.25 + 0.06);
}

TEST_CASE("kNN probe with k=1 on a duplicated dataset is perfect") {
  // Duplicates land at adjacent indices, so the twin of every held-out
  // point sits in a training fold and matches with cosine exactly one.
  ldn::SeededRng rng(300, "knn-dup");
  const std::size_t base = 60;
  ldn::Matrix feats(2 * base, 5);
  std::vector<std::int32_t> labels(2 * base);
  for (std::size_t i = 0; i < base; ++i) {
    std::vector<double> v(5);
    for (double& x : v) x = rng.gaussian();
    const std::int32_t lab = static_cast<std::int32_t>(rng.next_u64() % 3);
    for (std::size_t d = 0; d < 5; ++d) {
      feats.at(2 * i, d) = v[d];
      feats.at(2 * i + 1, d) = v[d];
    }
    labels[2 * i] = lab;
    labels[2 * i + 1] = lab;
  }
  REQUIRE(ldn::knn_probe(feats, labels, 1) == 1.0);
}

TEST_CASE("kNN probe is deterministic and validates its input") {
  ldn::SeededRng rng(400, "knn-misc");
  ldn::Matrix feats = random_matrix(40, 3, rng);
  std::vector<std::int32_t> labels(40);
  for (auto& l : labels) l = static_cast<std::int32_t>(rng.next_u64() % 2);
  const double a = ldn::knn_probe(feats, labels, 7, 4);
  const double b = ldn::knn_probe(feats, labels, 7, 4);
  REQUIRE(a == b);

  std::vector<std::int32_t> short_labels(39, 0);
  REQUIRE_THROWS_AS(ldn::knn_probe(feats, short_labels), std::invalid_argument);
  REQUIRE_THROWS_AS(ldn::knn_probe(feats, labels, 0), std::invalid_argument);
  REQUIRE_THROWS_AS(ldn::knn_probe(feats, labels, 5, 1), std::invalid_argument);
  ldn::Matrix tiny = random_matrix(3, 3, rng);
  std::vector<std::int32_t> tiny_labels(3, 0);
  REQUIRE_THROWS_AS(ldn::knn_probe(tiny, tiny_labels, 1, 5), std::invalid_argument);
}

TEST_CASE("kNN probe clamps oversized k instead of failing") {
  // 10 points, 5 folds: training folds hold 8 points, so k=20 clamps to 7.
  ldn::SeededRng rng(500, "knn-clamp");
  ldn::Matrix feats(10, 2);
  std::vector<std::int32_t> labels(10);
  for (std::size_t i = 0; i < 10; ++i) {
    const double ang = (i < 5) ? 0.1 * static_cast<double>(i) : 3.0 + 0.1 * static_cast<double>(i);
    feats.at(i, 0) = std::cos(ang);
    feats.at(i, 1) = std::sin(ang);
    labels[i] = i < 5 ? 0 : 1;
  }
  const double acc = ldn::knn_probe(feats, labels, 20);
  REQUIRE(acc >= 0.0);
  REQUIRE(acc <= 1.0);
}

TEST_CASE("effective rank closed forms") {
  REQUIRE(std::fabs(ldn::effective_rank(diag_matrix({1.0, 1.0, 1.0, 0.0})) - 3.0) <= 1e-9);

  // Rank one: outer product of two fixed vectors.
  ldn::Matrix rank1(4, 3);
  const double u[4] = {1.0, -2.0, 0.5, 3.0};
  const double v[3] = {2.0, 1.0, -1.0};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) rank1.at(i, j) = u[i] * v[j];
  REQUIRE(std::fabs(ldn::effective_rank(rank1) - 1.0) <= 1e-9);

  // Singular values (2,1,1): p = (1/2,1/4,1/4), exp(H) = 2^{3/2}.
  REQUIRE(std::fabs(ldn::effective_rank(diag_matrix({2.0, 1.0, 1.0})) -
                    std::pow(2.0, 1.5)) <= 1e-9);
}

TEST_CASE("effective rank is scale invariant and rejects the zero matrix") {
  ldn::SeededRng rng(600, "rank-scale");
  const ldn::Matrix m = random_matrix(8, 5, rng);
  REQUIRE(std::fabs(ldn::effective_rank(m) - ldn::effective_rank(ldn::scale(m, 5.0))) <= 1e-10);
  REQUIRE_THROWS_AS(ldn::effective_rank(ldn::Matrix(4, 4, 0.0)), std::domain_error);
}

TEST_CASE("singular spectrum normalization and ordering") {
  const auto ident = ldn::singular_spectrum(diag_matrix({1.0, 1.0, 1.0, 1.0}), true);
  REQUIRE(ident.size() == 4);
  for (double s : ident) REQUIRE(std::fabs(s - 1.0) <= 1e-12);

  const auto steps = ldn::singular_spectrum(diag_matrix({4.0, 2.0, 1.0}), true);
  REQUIRE(std::fabs(steps[0] - 1.0) <= 1e-12);
  REQUIRE(std::fabs(steps[1] - 0.5) <= 1e-12);
  REQUIRE(std::fabs(steps[2] - 0.25) <= 1e-12);

  ldn::SeededRng rng(700, "spectrum-raw");
  const ldn::Matrix m = random_matrix(10, 6, rng);
  const auto raw = ldn::singular_spectrum(m, false);
  const auto direct = ldn::svd_values(m);
  REQUIRE(raw.size() == direct.size());
  for (std::size_t i = 0; i < raw.size(); ++i) REQUIRE(raw[i] == direct[i]);
  REQUIRE(std::is_sorted(raw.rbegin(), raw.rend()));

  REQUIRE_THROWS_AS(ldn::singular_spectrum(ldn::Matrix(3, 3, 0.0), true), std::domain_error);
}

TEST_CASE("attention entropy closed forms") {
  std::vector<double> uniform(576, 1.0 / 576.0);
  REQUIRE(std::fabs(ldn::attention_entropy(uniform) - std::log(576.0)) <= 1e-9);

  std::vector<double> onehot(10, 0.0);
  onehot[3] = 1.0;
  REQUIRE(ldn::attention_entropy(onehot) == 0.0);

  REQUIRE(std::fabs(ldn::attention_entropy({0.5, 0.25, 0.25}) - 1.5 * std::log(2.0)) <= 1e-12);
}

TEST_CASE("attention entropy is maximal at uniform") {
  ldn::SeededRng rng(800, "entropy-max");
  const std::size_t n = 64;
  const double peak = std::log(static_cast<double>(n));
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> w(n);
    double total = 0.0;
    for (double& x : w) {
      x = 0.05 + rng.uniform();
      total += x;
    }
    for (double& x : w) x /= total;
    REQUIRE(ldn::attention_entropy(w) <= peak + 1e-12);
  }
}

TEST_CASE("attention entropy validates its input") {
  REQUIRE_THROWS_AS(ldn::attention_entropy({}), std::invalid_argument);
  REQUIRE_THROWS_AS(ldn::attention_entropy({1.2, -0.2}), std::domain_error);
  REQUIRE_THROWS_AS(ldn::attention_entropy({0.4, 0.4}), std::invalid_argument);
}

TEST_CASE("mean pooling averages rows") {
  ldn::Matrix one(1, 3);
  one.at(0, 0) = 4.0;
  one.at(0, 1) = -1.0;
  one.at(0, 2) = 0.5;
  const auto single = ldn::mean_pool_visual(one);
  REQUIRE(single == std::vector<double>{4.0, -1.0, 0.5});

  ldn::Matrix opposed(2, 2);
  opposed.at(0, 0) = 3.0;
  opposed.at(0, 1) = -7.0;
  opposed.at(1, 0) = -3.0;
  opposed.at(1, 1) = 7.0;
  const auto zero = ldn::mean_pool_visual(opposed);
  REQUIRE(zero[0] == 0.0);
  REQUIRE(zero[1] == 0.0);

  ldn::Matrix m(3, 2);
  double col0 = 0.0, col1 = 0.0;
  ldn::SeededRng rng(900, "pool");
  for (std::size_t i = 0; i < 3; ++i) {
    m.at(i, 0) = rng.gaussian();
    m.at(i, 1) = rng.gaussian();
    col0 += m.at(i, 0);
    col1 += m.at(i, 1);
  }
  const auto pooled = ldn::mean_pool_visual(m);
  REQUIRE(std::fabs(pooled[0] - col0 / 3.0) <= 1e-15);
  REQUIRE(std::fabs(pooled[1] - col1 / 3.0) <= 1e-15);
}
