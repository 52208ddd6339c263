#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ldn/model.hpp"
#include "ldn/numerics.hpp"
#include "ldn/whd.hpp"

namespace ldn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard bias-corrected Adam over the named tensor map. Tensor iteration
// order is the map order, so updates are reproducible.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(TrainState& st, const std::map<std::string, Matrix>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [name, p] : st.params) {
      auto git = grads.find(name);
      if (git == grads.end())
        throw std::invalid_argument("Adam::step: missing gradient for " + name);
      const Matrix& g = git->second;
      if (!g.same_shape(p))
        throw std::invalid_argument("Adam::step: gradient shape mismatch for " + name);
      Matrix& m = m_.try_emplace(name, p.rows, p.cols).first->second;
      Matrix& v = v_.try_emplace(name, p.rows, p.cols).first->second;
      for (std::size_t i = 0; i < p.data.size(); ++i) {
        m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * g.data[i];
        v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * g.data[i] * g.data[i];
        const double mhat = m.data[i] / bc1;
        const double vhat = v.data[i] / bc2;
        p.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  std::size_t steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::map<std::string, Matrix> m_, v_;
};

struct TrainRunConfig {
  ModelConfig model;
  CorruptionConfig corruption;  // nominal rates; the schedule scales them
  Temperatures temps;
  LossWeights weights;
  WhdSchedule whd;
  AdamConfig adam;
  std::size_t steps = 500;
  std::size_t batch = 8;
  std::size_t dataset_size = 256;
  std::size_t probe_size = 16;
  std::size_t probe_interval = 25;
  bool latent_supervision = true;
};

// steps = 0 is legal: no updates, but the initial probe still runs
inline void validate(const TrainRunConfig& c) {
  validate(c.model);
  validate(c.corruption);
  validate(c.whd);
  if (c.batch == 0 || c.dataset_size == 0)
    throw std::invalid_argument("TrainRunConfig: batch and dataset must be positive");
  if (c.probe_size > 0 && c.probe_interval == 0)
    throw std::invalid_argument("TrainRunConfig: probe interval must be positive");
}

struct CachedSample {
  SyntheticSample sample;
  EncodedImage enc;
  SaliencyScores saliency;
};

inline std::vector<CachedSample> encode_dataset(const FrozenEncoder& encoder,
                                                std::vector<SyntheticSample> samples,
                                                SaliencyMode mode) {
  std::vector<CachedSample> out;
  out.reserve(samples.size());
  for (auto& s : samples) {
    CachedSample c;
    c.enc = encoder.encode(s.image);
    c.saliency = saliency_for(c.enc, mode);
    c.sample = std::move(s);
    out.push_back(std::move(c));
  }
  return out;
}

struct StepRecord {
  std::size_t step = 0;
  LossBreakdown losses;  // batch means
};

struct ProbeRecord {
  std::size_t step = 0;
  double mean_cosine = 0.0;  // decoded vs teacher over corrupted positions
};

struct TrainResult {
  TrainState state;
  std::vector<StepRecord> history;
  std::vector<ProbeRecord> probes;
  std::vector<Matrix> probe_layer_features;  // per layer: probe_size x hidden_dim
  std::vector<int> probe_labels;
};

namespace detail {

inline CorruptionConfig scaled_rates(CorruptionConfig c, double scale) {
  c.noise_rate *= scale;
  c.mask_rate *= scale;
  return c;
}

}  // namespace detail

// One optimizer step over a contiguous wrap-around batch. Returns the batch
// mean loss breakdown. Plans draw from per-sample streams named by image id
// and step, so batch composition never shifts any other stream.
inline LossBreakdown train_step(TrainState& st, Adam& opt, const TrainRunConfig& run,
                                const std::vector<CachedSample>& data, std::size_t step) {
  const double progress =
      static_cast<double>(step) / static_cast<double>(run.steps);
  const double wscale = run.latent_supervision ? whd_scale(progress, run.whd) : 0.0;
  const CorruptionConfig eff = detail::scaled_rates(run.corruption, wscale);

  std::map<std::string, Matrix> grad_sum;
  for (const auto& [name, p] : st.params) grad_sum.emplace(name, Matrix(p.rows, p.cols));
  LossBreakdown mean;

  for (std::size_t b = 0; b < run.batch; ++b) {
    const CachedSample& cs = data[(step * run.batch + b) % data.size()];
    CorruptionPlan plan;
    if (run.latent_supervision) {
      SeededRng rng(st.cfg.seed,
                    "plan/" + cs.sample.image_id + "/step" + std::to_string(step));
      plan = sample_plan(cs.saliency, eff, st.cfg.hidden_dim, rng);
    }
    Tape tape;
    ParamVars pv = stage_params(tape, st);
    ForwardOptions fo;
    fo.whd = wscale;
    fo.latent_supervision = run.latent_supervision;
    ForwardResult fr = run_forward(tape, pv, st, run.corruption, run.temps, run.weights,
                                   cs.enc, cs.sample, plan, fo);
    tape.backward(fr.total);
    for (auto& [name, var] : pv.v) add_in_place(grad_sum.at(name), tape.grad(var));
    mean.lang += fr.losses.lang;
    mean.rec += fr.losses.rec;
    mean.rel += fr.losses.rel;
    mean.con += fr.losses.con;
    mean.total += fr.losses.total;
  }

  const double inv_b = 1.0 / static_cast<double>(run.batch);
  for (auto& [name, g] : grad_sum) {
    for (double& v : g.data) v *= inv_b;
    ensure_finite(g, "train_step gradient");
  }
  mean.lang *= inv_b;
  mean.rec *= inv_b;
  mean.rel *= inv_b;
  mean.con *= inv_b;
  mean.total *= inv_b;
  mean.whd = wscale;
  opt.step(st, grad_sum);
  return mean;
}

// Mean cosine between decoded features and teacher targets over the
// corrupted positions of a fixed probe set. The plans are sampled once at
// nominal rates and replayed for every measurement.
inline double probe_alignment(const TrainState& st, const TrainRunConfig& run,
                              const std::vector<CachedSample>& probe,
                              const std::vector<CorruptionPlan>& plans) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    Tape tape;
    ParamVars pv = stage_params(tape, st);
    ForwardOptions fo;  // whd 1: probing uses the nominal objective shape
    ForwardResult fr = run_forward(tape, pv, st, run.corruption, run.temps, run.weights,
                                   probe[i].enc, probe[i].sample, plans[i], fo);
    const Matrix& dec = tape.value(fr.decoded);
    for (std::size_t r : plans[i].corrupted()) {
      sum += cosine(dec.row_copy(r), probe[i].enc.teacher.row_copy(r));
      ++count;
    }
  }
  if (count == 0) throw std::runtime_error("probe_alignment: no corrupted positions");
  return sum / static_cast<double>(count);
}

// Mean-pooled visual hidden states per layer for the probe set, used for
// representation analysis on a trained model.
inline std::vector<Matrix> probe_layer_features(const TrainState& st,
                                                const TrainRunConfig& run,
                                                const std::vector<CachedSample>& probe,
                                                const std::vector<CorruptionPlan>& plans) {
  const std::size_t s_len = st.cfg.patches();
  std::vector<Matrix> layers;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    Tape tape;
    ParamVars pv = stage_params(tape, st);
    ForwardOptions fo;
    fo.latent_supervision = run.latent_supervision;
    ForwardResult fr = run_forward(tape, pv, st, run.corruption, run.temps, run.weights,
                                   probe[i].enc, probe[i].sample,
                                   run.latent_supervision ? plans[i] : CorruptionPlan{}, fo);
    if (layers.empty())
      layers.assign(fr.layer_states.size(), Matrix(probe.size(), st.cfg.hidden_dim));
    for (std::size_t l = 0; l < fr.layer_states.size(); ++l) {
      const Matrix& xs = tape.value(fr.layer_states[l]);
      for (std::size_t c = 0; c < st.cfg.hidden_dim; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < s_len; ++r) s += xs.at(r, c);
        layers[l].at(i, c) = s / static_cast<double>(s_len);
      }
    }
  }
  return layers;
}

inline TrainResult run_training(const TrainRunConfig& run) {
  validate(run);
  TrainResult res;
  res.state = init_train_state(run.model);
  resize_noise_bins(res.state, run.corruption.bins);
  FrozenEncoder encoder(run.model);

  std::vector<CachedSample> data = encode_dataset(
      encoder, generate_synthetic_dataset(run.model, run.dataset_size, run.model.seed, "syn"),
      run.model.saliency);

  std::vector<CachedSample> probe;
  std::vector<CorruptionPlan> probe_plans;
  if (run.probe_size > 0) {
    probe = encode_dataset(
        encoder,
        generate_synthetic_dataset(run.model, run.probe_size, run.model.seed, "probe"),
        run.model.saliency);
    for (const auto& cs : probe) {
      SeededRng rng(run.model.seed, "probe-plan/" + cs.sample.image_id);
      probe_plans.push_back(
          sample_plan(cs.saliency, run.corruption, run.model.hidden_dim, rng));
      res.probe_labels.push_back(static_cast<int>(cs.sample.answer_class));
    }
  }

  Adam opt(run.adam);
  std::size_t probe_positions = 0;
  for (const auto& p : probe_plans) probe_positions += p.corrupted().size();
  const bool probing = run.latent_supervision && probe_positions > 0;
  if (probing)
    res.probes.push_back({0, probe_alignment(res.state, run, probe, probe_plans)});
  for (std::size_t step = 0; step < run.steps; ++step) {
    LossBreakdown mean = train_step(res.state, opt, run, data, step);
    res.history.push_back({step, mean});
    if (probing && ((step + 1) % run.probe_interval == 0 || step + 1 == run.steps))
      res.probes.push_back({step + 1, probe_alignment(res.state, run, probe, probe_plans)});
  }
  if (!probe.empty())
    res.probe_layer_features = probe_layer_features(res.state, run, probe, probe_plans);
  return res;
}

}  // namespace ldn
