#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldn/image.hpp"
#include "ldn/rng.hpp"

namespace ldn {

enum class Family { noise = 0, blur = 1, weather = 2, digital = 3 };

inline const std::array<std::string, 4>& family_names() {
  static const std::array<std::string, 4> names = {"noise", "blur", "weather", "digital"};
  return names;
}

inline std::string to_string(Family f) { return family_names()[static_cast<std::size_t>(f)]; }

inline Family family_from_string(const std::string& name) {
  const auto& names = family_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<Family>(i);
  throw std::invalid_argument("unknown corruption family: " + name);
}

inline const std::vector<std::string>& subtype_names(Family f) {
  static const std::array<std::vector<std::string>, 4> names = {{
      {"gaussian", "shot", "impulse", "speckle"},
      {"defocus", "glass", "motion", "zoom", "gaussian"},
      {"snow", "frost", "fog", "brightness", "spatter"},
      {"contrast", "elastic", "pixelate", "jpeg", "saturate"},
  }};
  return names[static_cast<std::size_t>(f)];
}

// Severity ladders, indexed by severity-1. These tables are normative for the
// protocol: changing an entry changes every manifest digest downstream.
inline const std::array<double, 5>& severity_ladder(Family f, std::size_t subtype) {
  using L = std::array<double, 5>;
  static const std::array<std::vector<L>, 4> tables = {{
      // noise: gaussian sigma, shot gain, impulse rate, speckle gain
      {L{0.04, 0.06, 0.08, 0.09, 0.10},
       L{0.08, 0.11, 0.14, 0.17, 0.20},
       L{0.02, 0.04, 0.07, 0.11, 0.16},
       L{0.15, 0.22, 0.30, 0.40, 0.52}},
      // blur: defocus radius px, glass blend, motion length px, zoom blend, gaussian sigma
      {L{1.0, 2.0, 3.0, 5.0, 7.0},
       L{0.30, 0.45, 0.60, 0.78, 0.95},
       L{3.0, 5.0, 7.0, 9.0, 11.0},
       L{0.35, 0.50, 0.65, 0.80, 0.95},
       L{0.7, 1.1, 1.7, 2.5, 3.5}},
      // weather: snow blend, frost blend, fog blend, brightness shift, spatter coverage
      {L{0.35, 0.50, 0.65, 0.80, 0.95},
       L{0.30, 0.45, 0.60, 0.75, 0.90},
       L{0.25, 0.40, 0.55, 0.70, 0.85},
       L{0.08, 0.15, 0.22, 0.30, 0.38},
       L{0.05, 0.09, 0.14, 0.20, 0.27}},
      // digital: contrast strength, elastic blend, pixelate block px, jpeg table scale, saturate gain
      {L{0.25, 0.40, 0.55, 0.68, 0.80},
       L{0.25, 0.42, 0.58, 0.75, 0.92},
       L{2.0, 3.0, 4.0, 6.0, 8.0},
       L{0.5, 1.0, 2.0, 3.5, 6.0},
       L{0.35, 0.70, 1.20, 1.90, 2.80}},
  }};
  const auto& fam = tables[static_cast<std::size_t>(f)];
  if (subtype >= fam.size()) throw std::out_of_range("subtype index out of range");
  return fam[subtype];
}

// Severity 0 is an internal hook: every kernel degenerates to the identity at
// parameter 0, which the tests rely on. Protocol severities are 1..5.
inline double severity_param(Family f, std::size_t subtype, int severity) {
  if (severity == 0) return 0.0;
  if (severity < 1 || severity > 5) throw std::invalid_argument("severity must be in 1..5");
  return severity_ladder(f, subtype)[static_cast<std::size_t>(severity - 1)];
}

// All per-image randomness hangs off this hash: subtype choice, and the seed of
// the rng that drives the chosen kernel.
inline std::uint64_t corruption_hash(std::uint64_t seed, Family f, const std::string& id) {
  return fnv1a64(std::to_string(seed) + ":" + to_string(f) + ":" + id);
}

inline std::size_t select_subtype(const std::string& id, Family f, std::uint64_t seed) {
  return static_cast<std::size_t>(corruption_hash(seed, f, id) % subtype_names(f).size());
}

struct CorruptionSpec {
  Family family = Family::noise;
  std::size_t subtype = 0;
  int severity = 3;
};

namespace imgproc {

// Planes are interleaved RGB doubles in [0,1]; index (y*w + x)*3 + ch.
using Plane = std::vector<double>;

inline Plane to_plane(const ImageBuffer& img) {
  Plane p(img.pixels.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(img.pixels[i]) / 255.0;
  return p;
}

// Round half to even, matching the default FP environment.
inline ImageBuffer from_plane(const Plane& p, std::size_t w, std::size_t h) {
  ImageBuffer img;
  img.width = w;
  img.height = h;
  img.pixels.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = std::clamp(p[i], 0.0, 1.0) * 255.0;
    img.pixels[i] = static_cast<std::uint8_t>(std::nearbyint(v));
  }
  return img;
}

inline std::size_t clamp_idx(std::ptrdiff_t v, std::size_t n) {
  if (v < 0) return 0;
  if (v >= static_cast<std::ptrdiff_t>(n)) return n - 1;
  return static_cast<std::size_t>(v);
}

inline double at_clamped(const Plane& p, std::size_t w, std::size_t h, std::ptrdiff_t x,
                         std::ptrdiff_t y, std::size_t ch) {
  return p[(clamp_idx(y, h) * w + clamp_idx(x, w)) * 3 + ch];
}

inline double bilinear(const Plane& p, std::size_t w, std::size_t h, double x, double y,
                       std::size_t ch) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto x0 = static_cast<std::ptrdiff_t>(fx);
  const auto y0 = static_cast<std::ptrdiff_t>(fy);
  const double tx = x - fx;
  const double ty = y - fy;
  const double a = at_clamped(p, w, h, x0, y0, ch);
  const double b = at_clamped(p, w, h, x0 + 1, y0, ch);
  const double c = at_clamped(p, w, h, x0, y0 + 1, ch);
  const double d = at_clamped(p, w, h, x0 + 1, y0 + 1, ch);
  return (a * (1.0 - tx) + b * tx) * (1.0 - ty) + (c * (1.0 - tx) + d * tx) * ty;
}

inline std::vector<double> gaussian_kernel_1d(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i / sigma) * (i / sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  return k;
}

inline Plane convolve_separable(const Plane& src, std::size_t w, std::size_t h,
                                const std::vector<double>& k) {
  const int radius = static_cast<int>(k.size() / 2);
  Plane mid(src.size()), out(src.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[static_cast<std::size_t>(i + radius)] *
                 at_clamped(src, w, h, static_cast<std::ptrdiff_t>(x) + i,
                            static_cast<std::ptrdiff_t>(y), ch);
        mid[(y * w + x) * 3 + ch] = acc;
      }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[static_cast<std::size_t>(i + radius)] *
                 at_clamped(mid, w, h, static_cast<std::ptrdiff_t>(x),
                            static_cast<std::ptrdiff_t>(y) + i, ch);
        out[(y * w + x) * 3 + ch] = acc;
      }
  return out;
}

// Smooth lattice noise in [0,1]; the lattice draw order never depends on severity.
inline std::vector<double> value_noise(std::size_t w, std::size_t h, std::size_t cells,
                                       SeededRng& rng) {
  const std::size_t gw = cells + 1;
  std::vector<double> lattice(gw * gw);
  for (double& v : lattice) v = rng.uniform();
  std::vector<double> out(w * h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const double gx = static_cast<double>(x) * static_cast<double>(cells) / static_cast<double>(w);
      const double gy = static_cast<double>(y) * static_cast<double>(cells) / static_cast<double>(h);
      std::size_t ix = std::min(static_cast<std::size_t>(gx), cells - 1);
      std::size_t iy = std::min(static_cast<std::size_t>(gy), cells - 1);
      double tx = gx - static_cast<double>(ix);
      double ty = gy - static_cast<double>(iy);
      tx = tx * tx * (3.0 - 2.0 * tx);
      ty = ty * ty * (3.0 - 2.0 * ty);
      const double a = lattice[iy * gw + ix];
      const double b = lattice[iy * gw + ix + 1];
      const double c = lattice[(iy + 1) * gw + ix];
      const double d = lattice[(iy + 1) * gw + ix + 1];
      out[y * w + x] = (a * (1.0 - tx) + b * tx) * (1.0 - ty) + (c * (1.0 - tx) + d * tx) * ty;
    }
  return out;
}

inline std::vector<double> fbm_noise(std::size_t w, std::size_t h, std::size_t base_cells,
                                     int octaves, SeededRng& rng) {
  std::vector<double> out(w * h, 0.0);
  double amp = 1.0, amp_total = 0.0;
  for (int o = 0; o < octaves; ++o) {
    const auto layer = value_noise(w, h, base_cells << o, rng);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += amp * layer[i];
    amp_total += amp;
    amp *= 0.5;
  }
  for (double& v : out) v /= amp_total;
  return out;
}

// ---- kernels -------------------------------------------------------------
// Every kernel: (a) draws an rng stream whose length is independent of the
// severity parameter, and (b) returns the input bit-for-bit at parameter 0.

inline Plane k_noise_gaussian(const Plane& x, std::size_t, std::size_t, double p, SeededRng& rng) {
  Plane out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + p * rng.gaussian();
  return out;
}

// Signal-dependent gaussian stand-in for photon noise; variance tracks intensity.
inline Plane k_noise_shot(const Plane& x, std::size_t, std::size_t, double p, SeededRng& rng) {
  Plane out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = x[i] + p * std::sqrt(std::max(x[i], 1.0 / 255.0)) * rng.gaussian();
  return out;
}

// Thresholding one uniform per pixel makes the corrupted sets nested across severities.
inline Plane k_noise_impulse(const Plane& x, std::size_t w, std::size_t h, double p,
                             SeededRng& rng) {
  Plane out = x;
  for (std::size_t i = 0; i < w * h; ++i) {
    const double u = rng.uniform();
    const double value = (rng.next_u64() & 1u) ? 1.0 : 0.0;
    if (u < p)
      for (std::size_t ch = 0; ch < 3; ++ch) out[i * 3 + ch] = value;
  }
  return out;
}

inline Plane k_noise_speckle(const Plane& x, std::size_t, std::size_t, double p, SeededRng& rng) {
  Plane out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * (1.0 + p * rng.gaussian());
  return out;
}

inline Plane k_blur_defocus(const Plane& x, std::size_t w, std::size_t h, double p, SeededRng&) {
  const int r = static_cast<int>(std::llround(p));
  if (r <= 0) return x;
  std::vector<std::array<int, 2>> taps;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx)
      if (dx * dx + dy * dy <= r * r) taps.push_back({dx, dy});
  const double wgt = 1.0 / static_cast<double>(taps.size());
  Plane out(x.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx)
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (const auto& t : taps)
          acc += at_clamped(x, w, h, static_cast<std::ptrdiff_t>(xx) + t[0],
                            static_cast<std::ptrdiff_t>(y) + t[1], ch);
        out[(y * w + xx) * 3 + ch] = acc * wgt;
      }
  return out;
}

// Local pixel shuffle blended in; the displacement field is fixed, only the
// blend moves with severity, so per-pixel error scales exactly with p.
inline Plane k_blur_glass(const Plane& x, std::size_t w, std::size_t h, double p, SeededRng& rng) {
  Plane out(x.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx) {
      const int dx = std::min(static_cast<int>(rng.uniform() * 5.0), 4) - 2;
      const int dy = std::min(static_cast<int>(rng.uniform() * 5.0), 4) - 2;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double moved = at_clamped(x, w, h, static_cast<std::ptrdiff_t>(xx) + dx,
                                        static_cast<std::ptrdiff_t>(y) + dy, ch);
        const std::size_t i = (y * w + xx) * 3 + ch;
        out[i] = x[i] + p * (moved - x[i]);
      }
    }
  return out;
}

inline Plane k_blur_motion(const Plane& x, std::size_t w, std::size_t h, double p,
                           SeededRng& rng) {
  const double theta = rng.uniform() * 3.14159265358979323846;
  const int len = std::max(1, static_cast<int>(std::llround(p)));
  const double cx = std::cos(theta), sy = std::sin(theta);
  Plane out(x.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx)
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int i = 0; i < len; ++i) {
          const double t = static_cast<double>(i) - static_cast<double>(len - 1) / 2.0;
          acc += bilinear(x, w, h, static_cast<double>(xx) + t * cx,
                          static_cast<double>(y) + t * sy, ch);
        }
        out[(y * w + xx) * 3 + ch] = acc / static_cast<double>(len);
      }
  return out;
}

inline Plane k_blur_zoom(const Plane& x, std::size_t w, std::size_t h, double p, SeededRng&) {
  static constexpr std::array<double, 4> scales = {1.06, 1.12, 1.18, 1.24};
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  Plane out(x.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx)
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (double s : scales)
          acc += bilinear(x, w, h, cx + (static_cast<double>(xx) - cx) / s,
                          cy + (static_cast<double>(y) - cy) / s, ch);
        const std::size_t i = (y * w + xx) * 3 + ch;
        out[i] = x[i] + p * (acc / static_cast<double>(scales.size()) - x[i]);
      }
  return out;
}

inline Plane k_blur_gaussian(const Plane& x, std::size_t w, std::size_t h, double p, SeededRng&) {
  if (p <= 0.0) return x;
  return convolve_separable(x, w, h, gaussian_kernel_1d(p));
}

// Sparse bright seeds smeared along one direction, then blended toward white.
inline Plane k_weather_snow(const Plane& x, std::size_t w, std::size_t h, double p,
                            SeededRng& rng) {
  const double theta = rng.uniform() * 3.14159265358979323846;
  std::vector<double> seeds(w * h);
  for (double& v : seeds) {
    const double u = rng.uniform();
    v = u > 0.97 ? (u - 0.97) / 0.03 : 0.0;
  }
  const double cx = std::cos(theta), sy = std::sin(theta);
  std::vector<double> streaks(w * h);
  constexpr int kStreakLen = 9;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx) {
      double acc = 0.0;
      for (int i = 0; i < kStreakLen; ++i) {
        const double t = static_cast<double>(i) - (kStreakLen - 1) / 2.0;
        const double sx = static_cast<double>(xx) + t * cx;
        const double sx_y = static_cast<double>(y) + t * sy;
        const auto ix = clamp_idx(static_cast<std::ptrdiff_t>(std::llround(sx)), w);
        const auto iy = clamp_idx(static_cast<std::ptrdiff_t>(std::llround(sx_y)), h);
        acc += seeds[iy * w + ix];
      }
      streaks[y * w + xx] = std::min(1.0, acc * 4.0 / kStreakLen);
    }
  Plane out(x.size());
  for (std::size_t i = 0; i < w * h; ++i) {
    const double t = p * streaks[i];
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const std::size_t j = i * 3 + ch;
      out[j] = x[j] + t * (0.95 - x[j]);
    }
  }
  return out;
}

inline Plane k_weather_frost(const Plane& x, std::size_t w, std::size_t h, double p,
                             SeededRng& rng) {
  static constexpr std::array<double, 3> pale = {0.82, 0.88, 0.96};
  const auto field = fbm_noise(w, h, 6, 3, rng);
  Plane out(x.size());
  for (std::size_t i = 0; i < w * h; ++i) {
    const double ridge = 1.0 - std::abs(2.0 * field[i] - 1.0);
    const double t = p * ridge * ridge * ridge;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const std::size_t j = i * 3 + ch;
      out[j] = x[j] + t * (pale[ch] - x[j]);
    }
  }
  return out;
}

inline Plane k_weather_fog(const Plane& x, std::size_t w, std::size_t h, double p,
                           SeededRng& rng) {
  const auto field = fbm_noise(w, h, 4, 3, rng);
  Plane out(x.size());
  for (std::size_t i = 0; i < w * h; ++i) {
    const double t = p * (0.35 + 0.65 * field[i]);
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const std::size_t j = i * 3 + ch;
      out[j] = x[j] + t * (0.92 - x[j]);
    }
  }
  return out;
}

inline Plane k_weather_brightness(const Plane& x, std::size_t, std::size_t, double p,
                                  SeededRng&) {
  Plane out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + p;
  return out;
}

// Coverage thresholds a fixed smooth field, so severity sets are nested.
inline Plane k_weather_spatter(const Plane& x, std::size_t w, std::size_t h, double p,
                               SeededRng& rng) {
  static constexpr std::array<double, 3> mud = {0.33, 0.24, 0.16};
  const auto field = fbm_noise(w, h, 5, 2, rng);
  Plane out = x;
  for (std::size_t i = 0; i < w * h; ++i)
    if (field[i] > 1.0 - p)
      for (std::size_t ch = 0; ch < 3; ++ch) out[i * 3 + ch] = mud[ch];
  return out;
}

inline Plane k_digital_contrast(const Plane& x, std::size_t w, std::size_t h, double p,
                                SeededRng&) {
  std::array<double, 3> mean = {0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < w * h; ++i)
    for (std::size_t ch = 0; ch < 3; ++ch) mean[ch] += x[i * 3 + ch];
  for (double& m : mean) m /= static_cast<double>(w * h);
  Plane out(x.size());
  for (std::size_t i = 0; i < w * h; ++i)
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const std::size_t j = i * 3 + ch;
      out[j] = x[j] + p * (mean[ch] - x[j]);
    }
  return out;
}

inline Plane k_digital_elastic(const Plane& x, std::size_t w, std::size_t h, double p,
                               SeededRng& rng) {
  constexpr double kAmplitude = 6.0;
  const auto fx = fbm_noise(w, h, 4, 2, rng);
  const auto fy = fbm_noise(w, h, 4, 2, rng);
  Plane out(x.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t xx = 0; xx < w; ++xx) {
      const std::size_t i = y * w + xx;
      const double sxp = static_cast<double>(xx) + kAmplitude * (2.0 * fx[i] - 1.0);
      const double syp = static_cast<double>(y) + kAmplitude * (2.0 * fy[i] - 1.0);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double warped = bilinear(x, w, h, sxp, syp, ch);
        const std::size_t j = i * 3 + ch;
        out[j] = x[j] + p * (warped - x[j]);
      }
    }
  return out;
}

inline Plane k_digital_pixelate(const Plane& x, std::size_t w, std::size_t h, double p,
                                SeededRng&) {
  const auto block = static_cast<std::size_t>(std::max<long long>(1, std::llround(p)));
  if (block <= 1) return x;
  Plane out(x.size());
  for (std::size_t by = 0; by < h; by += block)
    for (std::size_t bx = 0; bx < w; bx += block) {
      const std::size_t ye = std::min(by + block, h);
      const std::size_t xe = std::min(bx + block, w);
      const double count = static_cast<double>((ye - by) * (xe - bx));
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (std::size_t y = by; y < ye; ++y)
          for (std::size_t xx = bx; xx < xe; ++xx) acc += x[(y * w + xx) * 3 + ch];
        const double v = acc / count;
        for (std::size_t y = by; y < ye; ++y)
          for (std::size_t xx = bx; xx < xe; ++xx) out[(y * w + xx) * 3 + ch] = v;
      }
    }
  return out;
}

namespace jpegdct {

// Standard luminance quantization table, applied to all three channels here.
inline const std::array<double, 64>& quant_table() {
  static const std::array<double, 64> q = {
      16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
      14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
      18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
      49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
  return q;
}

inline const std::array<double, 64>& dct_basis() {
  static const std::array<double, 64> c = [] {
    std::array<double, 64> m{};
    for (int u = 0; u < 8; ++u)
      for (int xi = 0; xi < 8; ++xi)
        m[static_cast<std::size_t>(u * 8 + xi)] =
            std::sqrt((u == 0 ? 1.0 : 2.0) / 8.0) *
            std::cos((2.0 * xi + 1.0) * u * 3.14159265358979323846 / 16.0);
    return m;
  }();
  return c;
}

}  // namespace jpegdct

// 8x8 block DCT quantize/dequantize; the parameter scales the quantization
// steps, and a step below epsilon leaves the coefficient untouched, so the
// parameter-0 limit is the plain DCT round trip.
inline Plane k_digital_jpeg(const Plane& x, std::size_t w, std::size_t h, double p, SeededRng&) {
  const auto& q = jpegdct::quant_table();
  const auto& c = jpegdct::dct_basis();
  Plane out(x.size());
  const std::size_t bw = (w + 7) / 8, bh = (h + 7) / 8;
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t byi = 0; byi < bh; ++byi)
      for (std::size_t bxi = 0; bxi < bw; ++bxi) {
        double block[64];
        for (int yy = 0; yy < 8; ++yy)
          for (int xx = 0; xx < 8; ++xx)
            block[yy * 8 + xx] =
                at_clamped(x, w, h, static_cast<std::ptrdiff_t>(bxi * 8) + xx,
                           static_cast<std::ptrdiff_t>(byi * 8) + yy, ch);
        double tmp[64], coef[64];
        // coef = C * block * C^T
        for (int u = 0; u < 8; ++u)
          for (int xx = 0; xx < 8; ++xx) {
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += c[u * 8 + k] * block[k * 8 + xx];
            tmp[u * 8 + xx] = acc;
          }
        for (int u = 0; u < 8; ++u)
          for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += tmp[u * 8 + k] * c[v * 8 + k];
            const double step = p * q[static_cast<std::size_t>(u * 8 + v)] / 255.0;
            coef[u * 8 + v] = step > 1e-12 ? step * std::nearbyint(acc / step) : acc;
          }
        // block = C^T * coef * C
        for (int xx = 0; xx < 8; ++xx)
          for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += c[k * 8 + xx] * coef[k * 8 + v];
            tmp[xx * 8 + v] = acc;
          }
        for (int yy = 0; yy < 8; ++yy)
          for (int xx = 0; xx < 8; ++xx) {
            double acc = 0.0;
            for (int k = 0; k < 8; ++k) acc += tmp[yy * 8 + k] * c[k * 8 + xx];
            const std::size_t px = bxi * 8 + static_cast<std::size_t>(xx);
            const std::size_t py = byi * 8 + static_cast<std::size_t>(yy);
            if (px < w && py < h) out[(py * w + px) * 3 + ch] = acc;
          }
      }
  return out;
}

inline Plane k_digital_saturate(const Plane& x, std::size_t w, std::size_t h, double p,
                                SeededRng&) {
  Plane out(x.size());
  for (std::size_t i = 0; i < w * h; ++i) {
    const double luma = (x[i * 3] + x[i * 3 + 1] + x[i * 3 + 2]) / 3.0;
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const std::size_t j = i * 3 + ch;
      out[j] = luma + (1.0 + p) * (x[j] - luma);
    }
  }
  return out;
}

using Kernel = Plane (*)(const Plane&, std::size_t, std::size_t, double, SeededRng&);

inline Kernel kernel_for(Family f, std::size_t subtype) {
  static const std::array<std::vector<Kernel>, 4> table = {{
      {k_noise_gaussian, k_noise_shot, k_noise_impulse, k_noise_speckle},
      {k_blur_defocus, k_blur_glass, k_blur_motion, k_blur_zoom, k_blur_gaussian},
      {k_weather_snow, k_weather_frost, k_weather_fog, k_weather_brightness, k_weather_spatter},
      {k_digital_contrast, k_digital_elastic, k_digital_pixelate, k_digital_jpeg,
       k_digital_saturate},
  }};
  const auto& fam = table[static_cast<std::size_t>(f)];
  if (subtype >= fam.size()) throw std::out_of_range("subtype index out of range");
  return fam[subtype];
}

}  // namespace imgproc

// Raw-parameter entry point; tests use it to drive kernels to their identity limit.
inline ImageBuffer apply_with_param(const ImageBuffer& img, Family f, std::size_t subtype,
                                    double param, SeededRng& rng) {
  if (img.pixels.size() != img.width * img.height * 3)
    throw std::invalid_argument("image pixel count does not match dimensions");
  const auto plane = imgproc::to_plane(img);
  const auto out = imgproc::kernel_for(f, subtype)(plane, img.width, img.height, param, rng);
  return imgproc::from_plane(out, img.width, img.height);
}

inline ImageBuffer apply_image_corruption(const ImageBuffer& img, const CorruptionSpec& spec,
                                          SeededRng& rng) {
  return apply_with_param(img, spec.family, spec.subtype,
                          severity_param(spec.family, spec.subtype, spec.severity), rng);
}

// Full per-image protocol: hash picks the subtype and seeds the kernel rng.
struct CorruptedImage {
  ImageBuffer image;
  std::size_t subtype = 0;
};

inline CorruptedImage corrupt_one(const ImageBuffer& img, Family f, int severity,
                                  std::uint64_t seed, const std::string& id) {
  const std::uint64_t h = corruption_hash(seed, f, id);
  const std::size_t subtype = static_cast<std::size_t>(h % subtype_names(f).size());
  SeededRng rng(h, subtype_names(f)[subtype]);
  CorruptionSpec spec{f, subtype, severity};
  return CorruptedImage{apply_image_corruption(img, spec, rng), subtype};
}

}  // namespace ldn
