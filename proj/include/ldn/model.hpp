#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldn/corruption.hpp"
#include "ldn/encoder.hpp"
#include "ldn/losses.hpp"
#include "ldn/synthetic.hpp"
#include "ldn/tape.hpp"

namespace ldn {

// Trainable tensors keyed by name. std::map keeps iteration order stable,
// which every consumer (Adam, gradient maps, checkpoints) relies on.
struct TrainState {
  ModelConfig cfg;
  std::map<std::string, Matrix> params;
};

namespace detail {

inline Matrix seeded_gaussian(std::uint64_t seed, const std::string& name, std::size_t r,
                              std::size_t c, double s) {
  SeededRng rng(seed, "init/" + name);
  Matrix m(r, c);
  for (double& v : m.data) v = s * rng.gaussian();
  return m;
}

}  // namespace detail

inline TrainState init_train_state(const ModelConfig& cfg) {
  validate(cfg);
  TrainState st;
  st.cfg = cfg;
  const std::size_t dv = cfg.visual_dim, dh = cfg.hidden_dim, dt = cfg.target_dim;
  const std::size_t dm = 4 * dh;
  // weight matrices carry fan-in scaling so activations stay near unit
  // variance from the first step; embeddings and conditioning tables start
  // small and grow as needed
  auto g = [&](const std::string& name, std::size_t r, std::size_t c) {
    st.params[name] =
        detail::seeded_gaussian(cfg.seed, name, r, c, 1.0 / std::sqrt(static_cast<double>(r)));
  };
  auto emb = [&](const std::string& name, std::size_t r, std::size_t c) {
    st.params[name] = detail::seeded_gaussian(cfg.seed, name, r, c, 0.1);
  };
  auto zeros = [&](const std::string& name, std::size_t r, std::size_t c) {
    st.params[name] = Matrix(r, c);
  };
  auto ones = [&](const std::string& name, std::size_t c) {
    st.params[name] = Matrix(1, c, 1.0);
  };

  g("proj.w1", dv, dh);
  zeros("proj.b1", 1, dh);
  g("proj.w2", dh, dh);
  zeros("proj.b2", 1, dh);
  emb("tok_embed", cfg.vocab, dh);
  emb("pos_embed", cfg.patches() + cfg.max_text, dh);
  emb("cond.mask", 1, dh);
  emb("cond.noise", 8, dh);  // bins fixed by the corruption config at run time
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    ones(p + "ln1.g", dh);
    zeros(p + "ln1.b", 1, dh);
    g(p + "attn.wq", dh, dh);
    g(p + "attn.wk", dh, dh);
    g(p + "attn.wv", dh, dh);
    g(p + "attn.wo", dh, dh);
    zeros(p + "attn.bq", 1, dh);
    zeros(p + "attn.bk", 1, dh);
    zeros(p + "attn.bv", 1, dh);
    zeros(p + "attn.bo", 1, dh);
    ones(p + "ln2.g", dh);
    zeros(p + "ln2.b", 1, dh);
    g(p + "mlp.w1", dh, dm);
    zeros(p + "mlp.b1", 1, dm);
    g(p + "mlp.w2", dm, dh);
    zeros(p + "mlp.b2", 1, dh);
  }
  ones("final.ln.g", dh);
  zeros("final.ln.b", 1, dh);
  g("lm_head.w", dh, cfg.vocab);
  zeros("lm_head.b", 1, cfg.vocab);
  g("dec.w1", dh, dh);
  zeros("dec.b1", 1, dh);
  g("dec.w2", dh, dt);
  zeros("dec.b2", 1, dt);
  return st;
}

// Rebuild the conditioning table rows if the corruption config wants a
// different bin count than the checkpoint carries.
inline void resize_noise_bins(TrainState& st, std::size_t bins) {
  Matrix& t = st.params.at("cond.noise");
  if (t.rows == bins) return;
  t = detail::seeded_gaussian(st.cfg.seed, "cond.noise", bins, st.cfg.hidden_dim, 0.1);
}

struct ParamVars {
  std::map<std::string, Tape::Var> v;

  Tape::Var at(const std::string& name) const {
    auto it = v.find(name);
    if (it == v.end()) throw std::out_of_range("ParamVars: unknown tensor " + name);
    return it->second;
  }
};

inline ParamVars stage_params(Tape& tape, const TrainState& st) {
  ParamVars pv;
  for (const auto& [name, m] : st.params) pv.v[name] = tape.leaf(m);
  return pv;
}

struct ForwardOptions {
  double whd = 1.0;                // schedule scale applied to auxiliary weights
  bool latent_supervision = true;  // off: pure language objective, no corruption
};

struct ForwardResult {
  Tape::Var total;             // 1x1 root
  Tape::Var decoded;           // S x target_dim; invalid when supervision is off
  Tape::Var supervise_hidden;  // S x hidden_dim; invalid when supervision is off
  std::vector<Tape::Var> layer_states;  // full sequence after embed and each block
  LossBreakdown losses;
  bool rel_degenerate = false;
};

// Builds the whole per-sample graph: project, corrupt, decode text causally,
// read the language loss, and attach the latent losses at the supervision
// layer through their closed-form gradients.
inline ForwardResult run_forward(Tape& tape, const ParamVars& pv, const TrainState& st,
                                 const CorruptionConfig& ccfg, const Temperatures& temps,
                                 const LossWeights& weights, const EncodedImage& enc,
                                 const SyntheticSample& sample, const CorruptionPlan& plan,
                                 const ForwardOptions& opt) {
  const ModelConfig& cfg = st.cfg;
  const std::size_t s_len = cfg.patches();
  const std::size_t t_len = sample.text.size();
  if (t_len == 0 || t_len > cfg.max_text)
    throw std::invalid_argument("run_forward: text length out of range");
  if (enc.features.rows != s_len || enc.features.cols != cfg.visual_dim)
    throw std::invalid_argument("run_forward: encoded feature shape mismatch");
  const std::size_t seq = s_len + t_len;

  // visual projection into the decoder width
  Tape::Var vfeat = tape.leaf(enc.features);
  Tape::Var h = tape.add_row_broadcast(tape.matmul(vfeat, pv.at("proj.w1")), pv.at("proj.b1"));
  h = tape.gelu(h);
  h = tape.add_row_broadcast(tape.matmul(h, pv.at("proj.w2")), pv.at("proj.b2"));

  if (opt.latent_supervision)
    h = tape.corrupt(h, plan, pv.at("cond.mask"), pv.at("cond.noise"), ccfg);

  // token and position embeddings
  std::vector<std::size_t> tok_idx(sample.text.begin(), sample.text.end());
  for (std::size_t t : tok_idx)
    if (t >= cfg.vocab) throw std::out_of_range("run_forward: token id out of range");
  Tape::Var temb = tape.select_rows(pv.at("tok_embed"), tok_idx);
  Tape::Var x = tape.concat_rows(h, temb);
  x = tape.add(x, tape.slice_rows(pv.at("pos_embed"), 0, seq));

  ForwardResult out;
  out.layer_states.push_back(x);

  const std::size_t heads = cfg.heads;
  const std::size_t hd = cfg.hidden_dim / heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(hd));

  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Tape::Var n1 = tape.layer_norm(x, pv.at(p + "ln1.g"), pv.at(p + "ln1.b"));
    Tape::Var q = tape.add_row_broadcast(tape.matmul(n1, pv.at(p + "attn.wq")),
                                         pv.at(p + "attn.bq"));
    Tape::Var k = tape.add_row_broadcast(tape.matmul(n1, pv.at(p + "attn.wk")),
                                         pv.at(p + "attn.bk"));
    Tape::Var v = tape.add_row_broadcast(tape.matmul(n1, pv.at(p + "attn.wv")),
                                         pv.at(p + "attn.bv"));
    std::vector<Tape::Var> ctx;
    ctx.reserve(heads);
    for (std::size_t hh = 0; hh < heads; ++hh) {
      Tape::Var qh = tape.slice_cols(q, hh * hd, (hh + 1) * hd);
      Tape::Var kh = tape.slice_cols(k, hh * hd, (hh + 1) * hd);
      Tape::Var vh = tape.slice_cols(v, hh * hd, (hh + 1) * hd);
      Tape::Var att = tape.causal_softmax(tape.scale(tape.matmul_nt(qh, kh), att_scale));
      ctx.push_back(tape.matmul(att, vh));
    }
    Tape::Var mixed = tape.add_row_broadcast(
        tape.matmul(tape.concat_cols(ctx), pv.at(p + "attn.wo")), pv.at(p + "attn.bo"));
    x = tape.add(x, mixed);

    Tape::Var n2 = tape.layer_norm(x, pv.at(p + "ln2.g"), pv.at(p + "ln2.b"));
    Tape::Var m1 = tape.gelu(tape.add_row_broadcast(tape.matmul(n2, pv.at(p + "mlp.w1")),
                                                    pv.at(p + "mlp.b1")));
    Tape::Var m2 = tape.add_row_broadcast(tape.matmul(m1, pv.at(p + "mlp.w2")),
                                          pv.at(p + "mlp.b2"));
    x = tape.add(x, m2);
    out.layer_states.push_back(x);

    if (opt.latent_supervision && l + 1 == cfg.supervise_layer)
      out.supervise_hidden = tape.slice_rows(x, 0, s_len);
  }

  Tape::Var xf = tape.layer_norm(x, pv.at("final.ln.g"), pv.at("final.ln.b"));
  Tape::Var logits =
      tape.add_row_broadcast(tape.matmul(xf, pv.at("lm_head.w")), pv.at("lm_head.b"));

  // next-token language loss on assistant rows: position s_len + j - 1
  // predicts text[j]
  std::vector<int> targets(seq, 0);
  std::vector<unsigned char> active(seq, 0);
  if (sample.assistant_mask.size() != t_len)
    throw std::invalid_argument("run_forward: assistant mask length mismatch");
  for (std::size_t j = 0; j < t_len; ++j) {
    if (!sample.assistant_mask[j]) continue;
    if (s_len + j == 0) throw std::invalid_argument("run_forward: no context row");
    targets[s_len + j - 1] = static_cast<int>(sample.text[j]);
    active[s_len + j - 1] = 1;
  }
  Tape::Var lang = tape.softmax_xent(logits, std::move(targets), std::move(active));

  if (!opt.latent_supervision) {
    out.total = lang;
    out.losses = total_objective(tape.value(lang).at(0, 0), AuxLossValues{}, weights, 0.0);
    return out;
  }

  // decode head on the supervision-layer visual states
  Tape::Var d1 = tape.gelu(tape.add_row_broadcast(
      tape.matmul(out.supervise_hidden, pv.at("dec.w1")), pv.at("dec.b1")));
  out.decoded = tape.add_row_broadcast(tape.matmul(d1, pv.at("dec.w2")), pv.at("dec.b2"));

  const std::vector<std::size_t> cset = plan.corrupted();
  const Matrix& dec_val = tape.value(out.decoded);
  Matrix student(cset.size(), dec_val.cols);
  Matrix teacher(cset.size(), dec_val.cols);
  for (std::size_t i = 0; i < cset.size(); ++i)
    for (std::size_t c = 0; c < dec_val.cols; ++c) {
      student.at(i, c) = dec_val.at(cset[i], c);
      teacher.at(i, c) = enc.teacher.at(cset[i], c);
    }

  const LatentLoss rec = loss_rec(student, teacher);
  const LatentLoss rel = loss_rel(student, teacher, temps.relation);
  const LatentLoss con = loss_con(student, teacher, temps.contrast);
  out.rel_degenerate = rel.degenerate;

  auto scatter = [&](const Matrix& g) {
    Matrix full(dec_val.rows, dec_val.cols);
    for (std::size_t i = 0; i < cset.size(); ++i)
      for (std::size_t c = 0; c < dec_val.cols; ++c) full.at(cset[i], c) = g.at(i, c);
    return full;
  };
  Tape::Var rec_v = tape.external_loss(out.decoded, rec.value, scatter(rec.grad));
  Tape::Var rel_v = tape.external_loss(out.decoded, rel.value, scatter(rel.grad));
  Tape::Var con_v = tape.external_loss(out.decoded, con.value, scatter(con.grad));

  out.total = tape.weighted_sum({{lang, 1.0},
                                 {rec_v, opt.whd * weights.rec},
                                 {rel_v, opt.whd * weights.rel},
                                 {con_v, opt.whd * weights.con}});
  out.losses = total_objective(tape.value(lang).at(0, 0),
                               AuxLossValues{rec.value, rel.value, con.value}, weights,
                               opt.whd);
  return out;
}

// Saliency scores for one encoded image under the configured mode.
inline SaliencyScores saliency_for(const EncodedImage& enc, SaliencyMode mode) {
  switch (mode) {
    case SaliencyMode::cls_attention:
      return saliency_from_cls_attention(enc.attention);
    case SaliencyMode::received_attention:
      return saliency_from_received_attention(FrozenEncoder::patch_attention(enc));
    default:
      return saliency_from_features(enc.features);
  }
}

}  // namespace ldn
