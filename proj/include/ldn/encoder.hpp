#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldn/matrix.hpp"
#include "ldn/numerics.hpp"
#include "ldn/rng.hpp"
#include "ldn/saliency.hpp"

namespace ldn {

// Square RGB image with values in [0, 1], channel-interleaved row-major.
struct ToyImage {
  std::size_t side = 0;
  std::vector<double> rgb;  // side * side * 3

  double& at(std::size_t y, std::size_t x, std::size_t ch) {
    return rgb[(y * side + x) * 3 + ch];
  }
  double at(std::size_t y, std::size_t x, std::size_t ch) const {
    return rgb[(y * side + x) * 3 + ch];
  }
};

struct ModelConfig {
  std::size_t patch_grid = 4;       // patches per image side; S = grid^2
  std::size_t patch_size = 8;       // pixels per patch side
  std::size_t visual_dim = 32;      // encoder feature width
  std::size_t hidden_dim = 64;      // decoder stream width
  std::size_t target_dim = 32;      // teacher feature width
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t vocab = 64;
  std::size_t supervise_layer = 2;  // hidden states tapped after this block (1-based)
  std::size_t max_text = 8;
  std::uint64_t seed = 0;
  SaliencyMode saliency = SaliencyMode::cls_attention;

  std::size_t patches() const { return patch_grid * patch_grid; }
  std::size_t image_side() const { return patch_grid * patch_size; }
  std::size_t answer_classes() const { return 3 * patches(); }
};

inline void validate(const ModelConfig& c) {
  if (c.patch_grid == 0 || c.patch_size == 0 || c.visual_dim == 0 || c.hidden_dim == 0 ||
      c.layers == 0 || c.heads == 0 || c.vocab == 0 || c.max_text == 0)
    throw std::invalid_argument("ModelConfig: zero dimension");
  if (c.visual_dim % c.heads != 0 || c.hidden_dim % c.heads != 0)
    throw std::invalid_argument("ModelConfig: dims must divide by heads");
  // the teacher is the frozen encoder output, so the target width is the
  // encoder width by construction
  if (c.target_dim != c.visual_dim)
    throw std::invalid_argument("ModelConfig: target_dim must equal visual_dim");
  if (c.supervise_layer < 1 || c.supervise_layer > c.layers)
    throw std::invalid_argument("ModelConfig: supervise_layer out of range");
  if (c.vocab < c.answer_classes() + 4)
    throw std::invalid_argument("ModelConfig: vocab too small for the answer space");
  if (c.max_text < 4)
    throw std::invalid_argument("ModelConfig: max_text must cover the question template");
}

struct EncodedImage {
  Matrix features;                // S x visual_dim
  Matrix teacher;                 // S x target_dim, detached copy
  std::vector<Matrix> attention;  // per head, (S+1) x (S+1), class token first
};

// Fixed-weight patch encoder: linear patch embedding, class token,
// positions, one bidirectional attention block with a residual path. Weights
// come from the model seed and never train.
class FrozenEncoder {
 public:
  explicit FrozenEncoder(const ModelConfig& cfg) : cfg_(cfg) {
    validate(cfg);
    SeededRng rng(cfg.seed, "frozen-encoder");
    const std::size_t pdim = cfg.patch_size * cfg.patch_size * 3;
    const std::size_t d = cfg.visual_dim;
    patch_w_ = gauss(rng, pdim, d, 1.0 / std::sqrt(static_cast<double>(pdim)));
    patch_b_ = gauss(rng, 1, d, 0.02);
    cls_ = gauss(rng, 1, d, 0.02);
    pos_ = gauss(rng, cfg.patches() + 1, d, 0.02);
    ln_g_ = Matrix(1, d, 1.0);
    ln_b_ = Matrix(1, d, 0.0);
    const double ws = 1.0 / std::sqrt(static_cast<double>(d));
    wq_ = gauss(rng, d, d, ws);
    wk_ = gauss(rng, d, d, ws);
    wv_ = gauss(rng, d, d, ws);
    wo_ = gauss(rng, d, d, ws);
  }

  EncodedImage encode(const ToyImage& img) const {
    if (img.side != cfg_.image_side() || img.rgb.size() != img.side * img.side * 3)
      throw std::invalid_argument("FrozenEncoder::encode: image shape mismatch");
    for (double v : img.rgb)
      if (!std::isfinite(v))
        throw std::invalid_argument("FrozenEncoder::encode: non-finite pixel");

    const std::size_t s_len = cfg_.patches();
    const std::size_t d = cfg_.visual_dim;
    const std::size_t p = cfg_.patch_size;

    Matrix tokens(s_len + 1, d);
    for (std::size_t c = 0; c < d; ++c) tokens.at(0, c) = cls_.at(0, c) + pos_.at(0, c);
    for (std::size_t g = 0; g < s_len; ++g) {
      const std::size_t gy = g / cfg_.patch_grid, gx = g % cfg_.patch_grid;
      std::vector<double> flat;
      flat.reserve(p * p * 3);
      for (std::size_t y = 0; y < p; ++y)
        for (std::size_t x = 0; x < p; ++x)
          for (std::size_t ch = 0; ch < 3; ++ch)
            flat.push_back(img.at(gy * p + y, gx * p + x, ch));
      for (std::size_t c = 0; c < d; ++c) {
        double s = patch_b_.at(0, c);
        for (std::size_t k = 0; k < flat.size(); ++k) s += flat[k] * patch_w_.at(k, c);
        tokens.at(g + 1, c) = s + pos_.at(g + 1, c);
      }
    }

    Matrix xn = layer_norm_rows(tokens);
    Matrix q = matmul(xn, wq_);
    Matrix k = matmul(xn, wk_);
    Matrix v = matmul(xn, wv_);

    const std::size_t hd = d / cfg_.heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    EncodedImage out;
    Matrix ctx(s_len + 1, d);
    for (std::size_t h = 0; h < cfg_.heads; ++h) {
      Matrix attn(s_len + 1, s_len + 1);
      for (std::size_t r = 0; r <= s_len; ++r) {
        std::vector<double> scores(s_len + 1);
        for (std::size_t cidx = 0; cidx <= s_len; ++cidx) {
          double sc = 0.0;
          for (std::size_t e = 0; e < hd; ++e)
            sc += q.at(r, h * hd + e) * k.at(cidx, h * hd + e);
          scores[cidx] = sc * inv_sqrt;
        }
        attn.set_row(r, softmax(scores, 1.0));
      }
      for (std::size_t r = 0; r <= s_len; ++r)
        for (std::size_t e = 0; e < hd; ++e) {
          double s = 0.0;
          for (std::size_t cidx = 0; cidx <= s_len; ++cidx)
            s += attn.at(r, cidx) * v.at(cidx, h * hd + e);
          ctx.at(r, h * hd + e) = s;
        }
      out.attention.push_back(std::move(attn));
    }

    Matrix mixed = matmul(ctx, wo_);
    Matrix full = add(tokens, mixed);
    out.features = Matrix(s_len, d);
    for (std::size_t r = 0; r < s_len; ++r)
      for (std::size_t c = 0; c < d; ++c) out.features.at(r, c) = full.at(r + 1, c);
    ensure_finite(out.features, "FrozenEncoder::encode");
    out.teacher = out.features;  // detached by copy; nothing differentiates this
    return out;
  }

  // Patch-to-patch attention for received-attention saliency: class token
  // dropped, rows renormalised back to probability vectors.
  static std::vector<Matrix> patch_attention(const EncodedImage& enc) {
    std::vector<Matrix> out;
    for (const Matrix& a : enc.attention) {
      if (a.rows < 2) throw std::invalid_argument("patch_attention: no patches");
      Matrix p(a.rows - 1, a.cols - 1);
      for (std::size_t r = 1; r < a.rows; ++r) {
        double sum = 0.0;
        for (std::size_t c = 1; c < a.cols; ++c) sum += a.at(r, c);
        for (std::size_t c = 1; c < a.cols; ++c) p.at(r - 1, c - 1) = a.at(r, c) / sum;
      }
      out.push_back(std::move(p));
    }
    return out;
  }

  const ModelConfig& config() const { return cfg_; }

 private:
  static Matrix gauss(SeededRng& rng, std::size_t r, std::size_t c, double s) {
    Matrix m(r, c);
    for (double& v : m.data) v = s * rng.gaussian();
    return m;
  }

  Matrix layer_norm_rows(const Matrix& x) const {
    Matrix out(x.rows, x.cols);
    const double n = static_cast<double>(x.cols);
    for (std::size_t r = 0; r < x.rows; ++r) {
      double mu = 0.0;
      for (std::size_t c = 0; c < x.cols; ++c) mu += x.at(r, c);
      mu /= n;
      double var = 0.0;
      for (std::size_t c = 0; c < x.cols; ++c) {
        const double d = x.at(r, c) - mu;
        var += d * d;
      }
      var /= n;
      const double is = 1.0 / std::sqrt(var + 1e-5);
      for (std::size_t c = 0; c < x.cols; ++c)
        out.at(r, c) = (x.at(r, c) - mu) * is * ln_g_.at(0, c) + ln_b_.at(0, c);
    }
    return out;
  }

  ModelConfig cfg_;
  Matrix patch_w_, patch_b_, cls_, pos_, ln_g_, ln_b_, wq_, wk_, wv_, wo_;
};

}  // namespace ldn
