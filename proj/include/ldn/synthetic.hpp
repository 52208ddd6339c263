#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldn/encoder.hpp"
#include "ldn/rng.hpp"

namespace ldn {

// One supervised example: a rendered image plus a fixed-template question
// whose single answer token encodes (shape, cell).
struct SyntheticSample {
  std::string image_id;
  ToyImage image;
  std::vector<std::size_t> text;           // question tokens then answer token
  std::vector<int> assistant_mask;         // 1 where the loss applies
  std::size_t answer_class = 0;            // shape * patches + cell
  std::uint64_t noise_seed = 0;
  std::size_t shape = 0;                   // 0 square, 1 disk, 2 triangle
  std::size_t cell = 0;                    // patch index holding the shape
};

namespace detail {

inline void paint_shape(ToyImage& img, std::size_t shape, std::size_t cell,
                        std::size_t grid, std::size_t patch) {
  const std::size_t gy = cell / grid, gx = cell % grid;
  const double cy = (static_cast<double>(gy) + 0.5) * static_cast<double>(patch);
  const double cx = (static_cast<double>(gx) + 0.5) * static_cast<double>(patch);
  const double r = 0.38 * static_cast<double>(patch);
  double color[3] = {0.0, 0.0, 0.0};
  color[shape] = 0.9;  // square red, disk green, triangle blue
  for (std::size_t y = gy * patch; y < (gy + 1) * patch; ++y) {
    for (std::size_t x = gx * patch; x < (gx + 1) * patch; ++x) {
      const double dy = static_cast<double>(y) + 0.5 - cy;
      const double dx = static_cast<double>(x) + 0.5 - cx;
      bool inside = false;
      switch (shape) {
        case 0: inside = std::abs(dx) <= r && std::abs(dy) <= r; break;
        case 1: inside = dx * dx + dy * dy <= r * r; break;
        default: inside = dy <= r && std::abs(dx) <= 0.9 * (r - dy) * 0.5; break;
      }
      if (!inside) continue;
      for (std::size_t ch = 0; ch < 3; ++ch) img.at(y, x, ch) = color[ch];
    }
  }
}

}  // namespace detail

// Deterministic renderer: grey background with seeded per-pixel jitter and
// one solid shape centred in its cell. Same inputs give the same pixels.
inline ToyImage render_sample(const ModelConfig& cfg, std::size_t shape, std::size_t cell,
                              std::uint64_t noise_seed) {
  if (shape >= 3) throw std::invalid_argument("render_sample: shape out of range");
  if (cell >= cfg.patches()) throw std::invalid_argument("render_sample: cell out of range");
  ToyImage img;
  img.side = cfg.image_side();
  img.rgb.assign(img.side * img.side * 3, 0.25);
  SeededRng rng(noise_seed, "render-bg");
  for (double& v : img.rgb) {
    v += 0.08 * (rng.uniform() - 0.5);
    v = std::min(1.0, std::max(0.0, v));
  }
  detail::paint_shape(img, shape, cell, cfg.patch_grid, cfg.patch_size);
  return img;
}

// Token layout: the top of the vocabulary holds the three question tokens
// and a pad token; everything below is answer space.
inline std::size_t question_token(const ModelConfig& cfg, std::size_t j) {
  return cfg.vocab - 4 + j;
}

inline SyntheticSample make_sample(const ModelConfig& cfg, std::size_t shape, std::size_t cell,
                                   std::size_t index, std::uint64_t noise_seed,
                                   const std::string& id_prefix = "syn") {
  SyntheticSample s;
  char buf[32];
  std::snprintf(buf, sizeof buf, "-%05zu", index);
  s.image_id = id_prefix + buf;
  s.noise_seed = noise_seed;
  s.shape = shape;
  s.cell = cell;
  s.answer_class = shape * cfg.patches() + cell;
  s.image = render_sample(cfg, shape, cell, noise_seed);
  s.text = {question_token(cfg, 0), question_token(cfg, 1), question_token(cfg, 2),
            s.answer_class};
  s.assistant_mask = {0, 0, 0, 1};
  return s;
}

// Round-robin over the answer classes so every class appears within one
// cycle, then a seeded shuffle so batches mix classes.
inline std::vector<SyntheticSample> generate_synthetic_dataset(const ModelConfig& cfg,
                                                               std::size_t count,
                                                               std::uint64_t seed,
                                                               const std::string& tag) {
  validate(cfg);
  std::vector<SyntheticSample> out;
  out.reserve(count);
  SeededRng rng(seed, "dataset/" + tag);
  const std::size_t classes = cfg.answer_classes();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t cls = i % classes;
    out.push_back(make_sample(cfg, cls / cfg.patches(), cls % cfg.patches(), i,
                              rng.next_u64(), tag));
  }
  for (std::size_t i = count; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(out[i - 1], out[std::min(j, i - 1)]);
  }
  return out;
}

}  // namespace ldn
