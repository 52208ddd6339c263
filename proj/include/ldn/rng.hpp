#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ldn {

// 64-bit FNV-1a over the UTF-8 bytes of s. Also used by the image corruption
// protocol, so the constants here are load-bearing for golden outputs.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}
}  // namespace detail

// Counter-based generator (splitmix64 core) keyed by (seed, stream label).
// Identical (seed, label) pairs give byte-identical draw sequences across
// runs; distinct labels give independent streams. The exact constants and
// call order are frozen by golden tests, so do not change them.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::string stream_label)
      : seed_(seed), label_(std::move(stream_label)) {
    state_ = detail::mix64(seed_ + 0x9E3779B97F4A7C15ull) ^
             detail::mix64(fnv1a64(label_) + 0xD1B54A32D192ED03ull);
  }

  std::uint64_t seed() const { return seed_; }
  const std::string& stream_label() const { return label_; }

  // Independent stream addressed by a sub-label; parent state is untouched.
  SeededRng derive(std::string_view sub) const {
    return SeededRng(seed_, label_ + "/" + std::string(sub));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return detail::mix64(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("SeededRng::uniform: empty range");
    return lo + (hi - lo) * uniform();
  }

  // Standard normal via Box-Muller; the second value of each pair is cached.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t seed_;
  std::string label_;
  std::uint64_t state_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// dim i.i.d. draws from N(0, sigma^2).
inline std::vector<double> draw_gaussian(SeededRng& rng, std::size_t dim, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("draw_gaussian: sigma must be positive");
  std::vector<double> v(dim);
  for (double& x : v) x = sigma * rng.gaussian();
  return v;
}

// k sequential weighted draws without replacement. Weights must be
// non-negative and finite; zero-weight indices are never selected. Returns
// the chosen indices in draw order.
inline std::vector<std::size_t> sample_without_replacement(
    SeededRng& rng, const std::vector<double>& weights, std::size_t k) {
  std::size_t positive = 0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0)
      throw std::invalid_argument("sample_without_replacement: bad weight");
    if (w > 0.0) ++positive;
  }
  if (k > positive)
    throw std::invalid_argument(
        "sample_without_replacement: k exceeds positive-weight count");

  std::vector<double> w = weights;
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  for (std::size_t draw = 0; draw < k; ++draw) {
    double total = 0.0;
    for (double x : w) total += x;
    double u = rng.uniform() * total;
    std::size_t pick = weights.size();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] <= 0.0) continue;
      u -= w[i];
      pick = i;
      if (u < 0.0) break;
    }
    // u can stay non-negative from rounding; pick then holds the last
    // positive-weight index, which is the correct boundary case.
    chosen.push_back(pick);
    w[pick] = 0.0;
  }
  return chosen;
}

}  // namespace ldn
