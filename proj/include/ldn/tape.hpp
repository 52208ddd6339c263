#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ldn/corruption.hpp"
#include "ldn/matrix.hpp"

namespace ldn {

// Reverse-mode tape over a fixed matrix operator set. Nodes are created in
// topological order by construction; backward() walks them in reverse and
// fires the stored closures for every node that received gradient. Values
// and gradients are dense matrices; scalars are 1x1.
class Tape {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  Var leaf(Matrix value) {
    return push(std::move(value), {});
  }

  const Matrix& value(Var v) const { return nodes_[check(v)].val; }

  // Zero matrix when no gradient reached the node.
  Matrix grad(Var v) const {
    const Node& n = nodes_[check(v)];
    if (n.grad.data.empty()) return Matrix(n.val.rows, n.val.cols);
    return n.grad;
  }

  Var matmul(Var a, Var b) {
    Var out = push(ldn::matmul(value(a), value(b)), [this, a, b](const Matrix& g, int) {
      accumulate(a, ldn::matmul_nt(g, nodes_[b.id].val));
      accumulate(b, ldn::matmul_tn(nodes_[a.id].val, g));
    });
    return out;
  }

  // a * b^T
  Var matmul_nt(Var a, Var b) {
    return push(ldn::matmul_nt(value(a), value(b)), [this, a, b](const Matrix& g, int) {
      accumulate(a, ldn::matmul(g, nodes_[b.id].val));
      accumulate(b, ldn::matmul_tn(g, nodes_[a.id].val));
    });
  }

  Var add(Var a, Var b) {
    return push(ldn::add(value(a), value(b)), [this, a, b](const Matrix& g, int) {
      accumulate(a, g);
      accumulate(b, g);
    });
  }

  // m + row broadcast over every row; row is 1 x cols.
  Var add_row_broadcast(Var m, Var row) {
    const Matrix& mv = value(m);
    const Matrix& rv = value(row);
    if (rv.rows != 1 || rv.cols != mv.cols)
      throw std::invalid_argument("Tape::add_row_broadcast: bias shape mismatch");
    Matrix out = mv;
    for (std::size_t r = 0; r < out.rows; ++r)
      for (std::size_t c = 0; c < out.cols; ++c) out.at(r, c) += rv.at(0, c);
    return push(std::move(out), [this, m, row](const Matrix& g, int) {
      accumulate(m, g);
      Matrix rg(1, g.cols);
      for (std::size_t r = 0; r < g.rows; ++r)
        for (std::size_t c = 0; c < g.cols; ++c) rg.at(0, c) += g.at(r, c);
      accumulate(row, rg);
    });
  }

  Var scale(Var a, double s) {
    return push(ldn::scale(value(a), s), [this, a, s](const Matrix& g, int) {
      accumulate(a, ldn::scale(g, s));
    });
  }

  // Exact GELU: 0.5 x (1 + erf(x / sqrt(2))).
  Var gelu(Var a) {
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    const Matrix& x = value(a);
    Matrix out = x;
    for (double& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    return push(std::move(out), [this, a](const Matrix& g, int) {
      constexpr double kInvSqrt2 = 0.70710678118654752440;
      const Matrix& x = nodes_[a.id].val;
      Matrix d = g;
      for (std::size_t i = 0; i < d.data.size(); ++i) {
        const double v = x.data[i];
        const double phi = std::exp(-0.5 * v * v) * 0.39894228040143267794;
        d.data[i] *= 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * phi;
      }
      accumulate(a, d);
    });
  }

  // Row-wise layer norm with affine gain/bias (both 1 x cols).
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5) {
    const Matrix& xv = value(x);
    const Matrix& gv = value(gain);
    const Matrix& bv = value(bias);
    if (gv.rows != 1 || gv.cols != xv.cols || bv.rows != 1 || bv.cols != xv.cols)
      throw std::invalid_argument("Tape::layer_norm: affine shape mismatch");
    const std::size_t n = xv.cols;
    Matrix out(xv.rows, n);
    Matrix xhat(xv.rows, n);
    std::vector<double> inv_std(xv.rows);
    for (std::size_t r = 0; r < xv.rows; ++r) {
      double mu = 0.0;
      for (std::size_t c = 0; c < n; ++c) mu += xv.at(r, c);
      mu /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        const double d = xv.at(r, c) - mu;
        var += d * d;
      }
      var /= static_cast<double>(n);
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std[r] = is;
      for (std::size_t c = 0; c < n; ++c) {
        xhat.at(r, c) = (xv.at(r, c) - mu) * is;
        out.at(r, c) = xhat.at(r, c) * gv.at(0, c) + bv.at(0, c);
      }
    }
    auto xh = std::make_shared<Matrix>(std::move(xhat));
    auto istd = std::make_shared<std::vector<double>>(std::move(inv_std));
    return push(std::move(out), [this, x, gain, bias, xh, istd](const Matrix& g, int) {
      const Matrix& gv = nodes_[gain.id].val;
      const std::size_t n = g.cols;
      Matrix dx(g.rows, n);
      Matrix dgain(1, n);
      Matrix dbias(1, n);
      for (std::size_t r = 0; r < g.rows; ++r) {
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          const double dxhat = g.at(r, c) * gv.at(0, c);
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xh->at(r, c);
          dgain.at(0, c) += g.at(r, c) * xh->at(r, c);
          dbias.at(0, c) += g.at(r, c);
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t c = 0; c < n; ++c) {
          const double dxhat = g.at(r, c) * gv.at(0, c);
          dx.at(r, c) = (*istd)[r] * (dxhat - inv_n * sum_dxhat -
                                      xh->at(r, c) * inv_n * sum_dxhat_xhat);
        }
      }
      accumulate(x, dx);
      accumulate(gain, dgain);
      accumulate(bias, dbias);
    });
  }

  // Row-wise softmax where row r only sees columns <= r. Later columns are
  // exactly zero, which realises causal attention on square score matrices.
  Var causal_softmax(Var scores) {
    const Matrix& s = value(scores);
    if (s.rows != s.cols)
      throw std::invalid_argument("Tape::causal_softmax: scores must be square");
    Matrix out(s.rows, s.cols);
    for (std::size_t r = 0; r < s.rows; ++r) {
      double m = s.at(r, 0);
      for (std::size_t c = 1; c <= r; ++c) m = std::max(m, s.at(r, c));
      double z = 0.0;
      for (std::size_t c = 0; c <= r; ++c) {
        out.at(r, c) = std::exp(s.at(r, c) - m);
        z += out.at(r, c);
      }
      for (std::size_t c = 0; c <= r; ++c) out.at(r, c) /= z;
    }
    return push(std::move(out), [this, scores](const Matrix& g, int self) {
      const Matrix& p = nodes_[self].val;
      Matrix ds(g.rows, g.cols);
      for (std::size_t r = 0; r < g.rows; ++r) {
        double inner = 0.0;
        for (std::size_t c = 0; c <= r; ++c) inner += g.at(r, c) * p.at(r, c);
        for (std::size_t c = 0; c <= r; ++c)
          ds.at(r, c) = p.at(r, c) * (g.at(r, c) - inner);
      }
      accumulate(scores, ds);
    });
  }

  Var slice_rows(Var a, std::size_t r0, std::size_t r1) {
    const Matrix& v = value(a);
    if (r0 > r1 || r1 > v.rows) throw std::out_of_range("Tape::slice_rows: bad range");
    Matrix out(r1 - r0, v.cols);
    for (std::size_t r = r0; r < r1; ++r)
      for (std::size_t c = 0; c < v.cols; ++c) out.at(r - r0, c) = v.at(r, c);
    return push(std::move(out), [this, a, r0](const Matrix& g, int) {
      const Matrix& v = nodes_[a.id].val;
      Matrix da(v.rows, v.cols);
      for (std::size_t r = 0; r < g.rows; ++r)
        for (std::size_t c = 0; c < g.cols; ++c) da.at(r + r0, c) = g.at(r, c);
      accumulate(a, da);
    });
  }

  Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const Matrix& v = value(a);
    if (c0 > c1 || c1 > v.cols) throw std::out_of_range("Tape::slice_cols: bad range");
    Matrix out(v.rows, c1 - c0);
    for (std::size_t r = 0; r < v.rows; ++r)
      for (std::size_t c = c0; c < c1; ++c) out.at(r, c - c0) = v.at(r, c);
    return push(std::move(out), [this, a, c0](const Matrix& g, int) {
      const Matrix& v = nodes_[a.id].val;
      Matrix da(v.rows, v.cols);
      for (std::size_t r = 0; r < g.rows; ++r)
        for (std::size_t c = 0; c < g.cols; ++c) da.at(r, c + c0) = g.at(r, c);
      accumulate(a, da);
    });
  }

  Var concat_rows(Var a, Var b) {
    const Matrix& av = value(a);
    const Matrix& bv = value(b);
    if (av.cols != bv.cols) throw std::invalid_argument("Tape::concat_rows: cols differ");
    Matrix out(av.rows + bv.rows, av.cols);
    for (std::size_t r = 0; r < av.rows; ++r)
      for (std::size_t c = 0; c < av.cols; ++c) out.at(r, c) = av.at(r, c);
    for (std::size_t r = 0; r < bv.rows; ++r)
      for (std::size_t c = 0; c < bv.cols; ++c) out.at(av.rows + r, c) = bv.at(r, c);
    const std::size_t split = av.rows;
    return push(std::move(out), [this, a, b, split](const Matrix& g, int) {
      Matrix da(split, g.cols);
      Matrix db(g.rows - split, g.cols);
      for (std::size_t r = 0; r < split; ++r)
        for (std::size_t c = 0; c < g.cols; ++c) da.at(r, c) = g.at(r, c);
      for (std::size_t r = split; r < g.rows; ++r)
        for (std::size_t c = 0; c < g.cols; ++c) db.at(r - split, c) = g.at(r, c);
      accumulate(a, da);
      accumulate(b, db);
    });
  }

  Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("Tape::concat_cols: empty");
    std::size_t cols = 0;
    const std::size_t rows = value(parts[0]).rows;
    for (Var p : parts) {
      if (value(p).rows != rows)
        throw std::invalid_argument("Tape::concat_cols: rows differ");
      cols += value(p).cols;
    }
    Matrix out(rows, cols);
    std::size_t off = 0;
    for (Var p : parts) {
      const Matrix& v = value(p);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < v.cols; ++c) out.at(r, off + c) = v.at(r, c);
      off += v.cols;
    }
    auto ps = std::make_shared<std::vector<Var>>(parts);
    return push(std::move(out), [this, ps](const Matrix& g, int) {
      std::size_t off = 0;
      for (Var p : *ps) {
        const Matrix& v = nodes_[p.id].val;
        Matrix dp(v.rows, v.cols);
        for (std::size_t r = 0; r < v.rows; ++r)
          for (std::size_t c = 0; c < v.cols; ++c) dp.at(r, c) = g.at(r, off + c);
        accumulate(p, dp);
        off += v.cols;
      }
    });
  }

  // Gather rows by index; repeated indices accumulate on backward, so this
  // doubles as the embedding lookup.
  Var select_rows(Var a, std::vector<std::size_t> idx) {
    const Matrix& v = value(a);
    for (std::size_t i : idx)
      if (i >= v.rows) throw std::out_of_range("Tape::select_rows: index out of range");
    Matrix out(idx.size(), v.cols);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < v.cols; ++c) out.at(r, c) = v.at(idx[r], c);
    auto ids = std::make_shared<std::vector<std::size_t>>(std::move(idx));
    return push(std::move(out), [this, a, ids](const Matrix& g, int) {
      const Matrix& v = nodes_[a.id].val;
      Matrix da(v.rows, v.cols);
      for (std::size_t r = 0; r < ids->size(); ++r)
        for (std::size_t c = 0; c < g.cols; ++c) da.at((*ids)[r], c) += g.at(r, c);
      accumulate(a, da);
    });
  }

  // Corruption replay as a tape op. Clean rows pass gradient through,
  // noised rows scale it by (1 - tau), masked rows route it into the mask
  // embedding, and strength-bin embeddings collect their noised rows.
  Var corrupt(Var z, const CorruptionPlan& plan, Var mask_emb, Var noise_level,
              const CorruptionConfig& cfg) {
    const Matrix& zv = value(z);
    const Matrix& mv = value(mask_emb);
    const Matrix& nv = value(noise_level);
    if (mv.rows != 1 || mv.cols != zv.cols)
      throw std::invalid_argument("Tape::corrupt: mask embedding shape mismatch");
    ConditioningTables tables;
    tables.mask_embedding = mv.row_copy(0);
    tables.noise_level = nv;
    Matrix out = apply_corruption(zv, plan, tables, cfg);
    auto plan_copy = std::make_shared<CorruptionPlan>(plan);
    const double tau_max = cfg.tau_max;
    const std::size_t bins = cfg.bins;
    return push(std::move(out),
                [this, z, mask_emb, noise_level, plan_copy, tau_max, bins](
                    const Matrix& g, int) {
      Matrix dz = g;
      Matrix dmask(1, g.cols);
      Matrix dnoise(nodes_[noise_level.id].val.rows, g.cols);
      for (std::size_t k = 0; k < plan_copy->noised.size(); ++k) {
        const std::size_t r = plan_copy->noised[k];
        const double t = plan_copy->tau[k];
        const std::size_t b = bin_index(t, tau_max, bins);
        for (std::size_t c = 0; c < g.cols; ++c) {
          dnoise.at(b, c) += g.at(r, c);
          dz.at(r, c) = (1.0 - t) * g.at(r, c);
        }
      }
      for (std::size_t r : plan_copy->masked)
        for (std::size_t c = 0; c < g.cols; ++c) {
          dmask.at(0, c) += g.at(r, c);
          dz.at(r, c) = 0.0;
        }
      accumulate(z, dz);
      accumulate(mask_emb, dmask);
      accumulate(noise_level, dnoise);
    });
  }

  // Mean negative log-likelihood over the rows where active is set; the
  // returned node is 1x1. Rows outside the active set get zero gradient.
  Var softmax_xent(Var logits, std::vector<int> targets,
                   std::vector<unsigned char> active) {
    const Matrix& lv = value(logits);
    if (targets.size() != lv.rows || active.size() != lv.rows)
      throw std::invalid_argument("Tape::softmax_xent: row annotation mismatch");
    std::size_t n_active = 0;
    double total = 0.0;
    Matrix probs(lv.rows, lv.cols);
    for (std::size_t r = 0; r < lv.rows; ++r) {
      if (!active[r]) continue;
      if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= lv.cols)
        throw std::out_of_range("Tape::softmax_xent: target out of range");
      ++n_active;
      double m = lv.at(r, 0);
      for (std::size_t c = 1; c < lv.cols; ++c) m = std::max(m, lv.at(r, c));
      double z = 0.0;
      for (std::size_t c = 0; c < lv.cols; ++c) {
        probs.at(r, c) = std::exp(lv.at(r, c) - m);
        z += probs.at(r, c);
      }
      for (std::size_t c = 0; c < lv.cols; ++c) probs.at(r, c) /= z;
      total -= std::log(probs.at(r, targets[r]));
    }
    if (n_active == 0)
      throw std::invalid_argument("Tape::softmax_xent: no active rows");
    Matrix out(1, 1);
    out.at(0, 0) = total / static_cast<double>(n_active);
    auto pr = std::make_shared<Matrix>(std::move(probs));
    auto tg = std::make_shared<std::vector<int>>(std::move(targets));
    auto ac = std::make_shared<std::vector<unsigned char>>(std::move(active));
    const double inv_n = 1.0 / static_cast<double>(n_active);
    return push(std::move(out), [this, logits, pr, tg, ac, inv_n](const Matrix& g, int) {
      const double up = g.at(0, 0) * inv_n;
      Matrix dl(pr->rows, pr->cols);
      for (std::size_t r = 0; r < pr->rows; ++r) {
        if (!(*ac)[r]) continue;
        for (std::size_t c = 0; c < pr->cols; ++c) dl.at(r, c) = up * pr->at(r, c);
        dl.at(r, static_cast<std::size_t>((*tg)[r])) -= up;
      }
      accumulate(logits, dl);
    });
  }

  // Attach an externally evaluated loss with its exact gradient with respect
  // to the parent's value. Used at the decoded-feature boundary where the
  // latent losses carry closed-form gradients.
  Var external_loss(Var parent, double value, Matrix grad_wrt_parent) {
    const Matrix& pv = value_of(parent);
    if (!grad_wrt_parent.same_shape(pv))
      throw std::invalid_argument("Tape::external_loss: gradient shape mismatch");
    Matrix out(1, 1);
    out.at(0, 0) = value;
    auto gp = std::make_shared<Matrix>(std::move(grad_wrt_parent));
    return push(std::move(out), [this, parent, gp](const Matrix& g, int) {
      accumulate(parent, ldn::scale(*gp, g.at(0, 0)));
    });
  }

  // Weighted sum of 1x1 nodes.
  Var weighted_sum(const std::vector<std::pair<Var, double>>& terms) {
    if (terms.empty()) throw std::invalid_argument("Tape::weighted_sum: empty");
    Matrix out(1, 1);
    for (const auto& [v, w] : terms) {
      const Matrix& tv = value(v);
      if (tv.rows != 1 || tv.cols != 1)
        throw std::invalid_argument("Tape::weighted_sum: non-scalar term");
      out.at(0, 0) += w * tv.at(0, 0);
    }
    auto ts = std::make_shared<std::vector<std::pair<Var, double>>>(terms);
    return push(std::move(out), [this, ts](const Matrix& g, int) {
      for (const auto& [v, w] : *ts) {
        Matrix dv(1, 1);
        dv.at(0, 0) = w * g.at(0, 0);
        accumulate(v, dv);
      }
    });
  }

  void backward(Var root) {
    const int rid = check(root);
    const Matrix& rv = nodes_[rid].val;
    if (rv.rows != 1 || rv.cols != 1)
      throw std::invalid_argument("Tape::backward: root must be scalar");
    Matrix seed(1, 1);
    seed.at(0, 0) = 1.0;
    nodes_[rid].grad = seed;
    for (int i = rid; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.grad.data.empty() || !n.back) continue;
      n.back(n.grad, i);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  using BackFn = std::function<void(const Matrix&, int)>;

  struct Node {
    Matrix val;
    Matrix grad;
    BackFn back;
  };

  std::vector<Node> nodes_;

  const Matrix& value_of(Var v) const { return nodes_[check(v)].val; }

  int check(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
      throw std::out_of_range("Tape: invalid var");
    return v.id;
  }

  Var push(Matrix value, BackFn back) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(back)});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void accumulate(Var v, const Matrix& g) {
    Node& n = nodes_[check(v)];
    if (n.grad.data.empty()) {
      n.grad = g;
    } else {
      add_in_place(n.grad, g);
    }
  }
};

}  // namespace ldn
