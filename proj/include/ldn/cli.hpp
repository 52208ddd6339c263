#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldn/analysis.hpp"
#include "ldn/checkpoint.hpp"
#include "ldn/config.hpp"
#include "ldn/feature_dump.hpp"
#include "ldn/losses.hpp"
#include "ldn/model.hpp"
#include "ldn/protocol.hpp"
#include "ldn/svg_plot.hpp"
#include "ldn/tape.hpp"
#include "ldn/train.hpp"

namespace ldn {

// 0 success, 1 verification failure, 2 usage/config error, 3 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerify = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

inline std::string metrics_csv(const std::vector<StepRecord>& history) {
  using detail::format_double;
  std::string out = "step,lang,rec,rel,con,whd,total\n";
  for (const auto& rec : history) {
    out += std::to_string(rec.step);
    out += ',';
    out += format_double(rec.losses.lang);
    out += ',';
    out += format_double(rec.losses.rec);
    out += ',';
    out += format_double(rec.losses.rel);
    out += ',';
    out += format_double(rec.losses.con);
    out += ',';
    out += format_double(rec.losses.whd);
    out += ',';
    out += format_double(rec.losses.total);
    out += '\n';
  }
  return out;
}

inline std::string probe_csv(const std::vector<ProbeRecord>& probes) {
  std::string out = "step,mean_cosine\n";
  for (const auto& p : probes) {
    out += std::to_string(p.step);
    out += ',';
    out += detail::format_double(p.mean_cosine);
    out += '\n';
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

inline int cmd_train(const std::string& config_path, const std::string& out_dir_flag) {
  RunConfig cfg;
  std::string echo;
  try {
    cfg = load_run_config(config_path);
    validate(cfg.train);
    echo = serialize_run_config(cfg);
  } catch (const std::exception& e) {
    std::cerr << "train: " << e.what() << '\n';
    return kExitUsage;
  }
  const std::string out_dir = out_dir_flag.empty() ? cfg.out_dir : out_dir_flag;
  if (out_dir.empty()) {
    std::cerr << "train: no output directory (pass --out or set out_dir)\n";
    return kExitUsage;
  }

  TrainResult res;
  try {
    res = run_training(cfg.train);
  } catch (const std::exception& e) {
    std::cerr << "train: numerical failure: " << e.what() << '\n';
    return kExitNumeric;
  }

  try {
    std::filesystem::create_directories(out_dir);
    const auto dir = std::filesystem::path(out_dir);
    write_text_file((dir / "metrics.csv").string(), metrics_csv(res.history));
    write_text_file((dir / "probe.csv").string(), probe_csv(res.probes));
    write_checkpoint((dir / "checkpoint.bin").string(),
                     checkpoint_from_state(res.state, echo));
    FeatureDump dump;
    if (!res.probe_layer_features.empty()) {
      for (std::size_t l = 0; l < res.probe_layer_features.size(); ++l)
        dump.layers.push_back({static_cast<std::uint32_t>(l), res.probe_layer_features[l]});
      dump.labels.assign(res.probe_labels.begin(), res.probe_labels.end());
    }
    write_feature_dump((dir / "features.ldfd").string(), dump);
  } catch (const std::exception& e) {
    std::cerr << "train: cannot write outputs: " << e.what() << '\n';
    return kExitUsage;
  }

  if (res.history.empty())
    std::cout << "train: 0 steps, initial probe only\n";
  else
    std::cout << "train: " << res.history.size() << " steps, final total "
              << detail::format_double(res.history.back().losses.total) << '\n';
  return kExitOk;
}

inline int cmd_corrupt(const std::string& in_dir, const std::string& out_dir,
                       const std::string& family_name, int severity, std::uint64_t seed) {
  ProtocolConfig pc;
  try {
    pc.family = family_from_string(family_name);
    pc.severity = severity;
    pc.seed = seed;
    validate(pc);
    if (!std::filesystem::is_directory(in_dir))
      throw std::runtime_error("input directory not found: " + in_dir);
  } catch (const std::exception& e) {
    std::cerr << "corrupt: " << e.what() << '\n';
    return kExitUsage;
  }
  try {
    const auto rows = corrupt_dataset(in_dir, out_dir, pc);
    write_manifest((std::filesystem::path(out_dir) / "manifest.csv").string(), rows);
    std::size_t skipped = 0;
    for (const auto& r : rows)
      if (r.subtype == "skipped") ++skipped;
    std::cout << "corrupt: " << rows.size() - skipped << " images written, " << skipped
              << " skipped\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "corrupt: " << e.what() << '\n';
    return kExitUsage;
  }
}

namespace detail {

inline void emit_report(const std::string& text, const std::string& out_path) {
  if (out_path.empty())
    std::cout << text;
  else
    write_text_file(out_path, text);
}

}  // namespace detail

inline int cmd_analyze(const std::string& dump_path, const std::string& mode,
                       const std::string& reference_path = {},
                       const std::string& out_path = {}) {
  if (mode != "cka" && mode != "knn" && mode != "rank" && mode != "spectrum") {
    std::cerr << "analyze: unknown mode " << mode << " (expected cka|knn|rank|spectrum)\n";
    return kExitUsage;
  }
  try {
    const FeatureDump dump = read_feature_dump(dump_path);

    if (mode == "spectrum") {
      std::string csv = "layer,position,value\n";
      for (const auto& layer : dump.layers) {
        const auto spectrum = singular_spectrum(layer.features, true);
        for (std::size_t i = 0; i < spectrum.size(); ++i) {
          csv += std::to_string(layer.index);
          csv += ',';
          csv += std::to_string(i);
          csv += ',';
          csv += detail::format_double(spectrum[i]);
          csv += '\n';
        }
      }
      detail::emit_report(csv, out_path);
      return kExitOk;
    }

    nlohmann::ordered_json report;
    report["source"] = dump_path;
    report["mode"] = mode;
    report["layers"] = nlohmann::ordered_json::array();

    if (mode == "cka") {
      if (reference_path.empty()) {
        std::cerr << "analyze: cka mode requires --reference\n";
        return kExitUsage;
      }
      const FeatureDump ref = read_feature_dump(reference_path);
      report["reference"] = reference_path;
      if (ref.layers.size() != dump.layers.size())
        throw std::runtime_error("reference layer count differs from dump");
      for (std::size_t l = 0; l < dump.layers.size(); ++l) {
        if (dump.layers[l].features.rows != ref.layers[l].features.rows)
          throw std::runtime_error("reference row count differs at layer " +
                                   std::to_string(dump.layers[l].index));
        report["layers"].push_back(
            {{"layer", dump.layers[l].index},
             {"cka", linear_cka(dump.layers[l].features, ref.layers[l].features)}});
      }
    } else if (mode == "knn") {
      for (const auto& layer : dump.layers)
        report["layers"].push_back(
            {{"layer", layer.index},
             {"knn_accuracy", knn_probe(layer.features, dump.labels)}});
    } else {  // rank
      for (const auto& layer : dump.layers)
        report["layers"].push_back(
            {{"layer", layer.index}, {"effective_rank", effective_rank(layer.features)}});
    }
    detail::emit_report(report.dump(2) + "\n", out_path);
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "analyze: " << e.what() << '\n';
    return kExitUsage;
  }
}

namespace gradcheck_detail {

inline double rel_err(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1.0});
}

// Max relative error of a latent loss gradient against central differences
// over a grid of sizes. The sign flip is a deliberate fault injection hook
// proving the harness can fail.
inline double check_loss(const std::string& kind, std::uint64_t seed, bool flip_sign) {
  constexpr double kH = 1e-5;
  const Temperatures temps;
  auto eval = [&](const Matrix& yhat, const Matrix& y) -> LatentLoss {
    if (kind == "rec") return loss_rec(yhat, y);
    if (kind == "rel") return loss_rel(yhat, y, temps.relation);
    return loss_con(yhat, y, temps.contrast);
  };
  double worst = 0.0;
  for (const std::size_t rows : {2, 3, 5})
    for (const std::size_t cols : {3, 7})
      for (int instance = 0; instance < 10; ++instance) {
        const std::string tag = kind + "/" + std::to_string(rows) + "x" +
                                std::to_string(cols) + "/" + std::to_string(instance);
        SeededRng rng(seed, "gradcheck/" + tag);
        Matrix yhat(rows, cols), y(rows, cols);
        for (double& v : yhat.data) v = rng.gaussian();
        for (double& v : y.data) v = rng.gaussian();
        Matrix grad = eval(yhat, y).grad;
        if (flip_sign) grad.at(0, 0) = -grad.at(0, 0);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) {
            Matrix hi = yhat, lo = yhat;
            hi.at(r, c) += kH;
            lo.at(r, c) -= kH;
            const double fd = (eval(hi, y).value - eval(lo, y).value) / (2.0 * kH);
            worst = std::max(worst, rel_err(grad.at(r, c), fd));
          }
      }
  return worst;
}

// Composite objective gradient on a 20-entry probe of a small model. Params
// are nudged off the zero-bias init so the loss surface is well conditioned
// for finite differences.
inline double check_composite(std::uint64_t seed) {
  ModelConfig cfg;
  cfg.patch_grid = 2;
  cfg.patch_size = 4;
  cfg.visual_dim = 8;
  cfg.hidden_dim = 8;
  cfg.target_dim = 8;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.vocab = 24;
  cfg.supervise_layer = 1;
  cfg.max_text = 4;
  cfg.seed = seed;

  CorruptionConfig ccfg;
  TrainState st = init_train_state(cfg);
  resize_noise_bins(st, ccfg.bins);
  SeededRng prng(seed, "gradcheck/perturb");
  for (auto& [name, p] : st.params)
    for (double& v : p.data) v += 0.1 * prng.gaussian();

  const FrozenEncoder encoder(cfg);
  const SyntheticSample sample = make_sample(cfg, 2, 1, 0, seed + 77);
  const EncodedImage enc = encoder.encode(sample.image);
  const SaliencyScores sal = saliency_for(enc, cfg.saliency);
  CorruptionConfig boosted = ccfg;
  boosted.noise_rate = 0.5;  // S is tiny; force corrupted positions to exist
  boosted.mask_rate = 0.25;
  SeededRng plan_rng(seed, "gradcheck/plan");
  const CorruptionPlan plan = sample_plan(sal, boosted, cfg.hidden_dim, plan_rng);

  const Temperatures temps;
  const LossWeights weights;
  ForwardOptions fo;
  fo.whd = 0.8;

  auto objective = [&](const TrainState& state) {
    Tape tape;
    ParamVars pv = stage_params(tape, state);
    const ForwardResult fr =
        run_forward(tape, pv, state, ccfg, temps, weights, enc, sample, plan, fo);
    return tape.value(fr.total).at(0, 0);
  };

  Tape tape;
  ParamVars pv = stage_params(tape, st);
  const ForwardResult fr =
      run_forward(tape, pv, st, ccfg, temps, weights, enc, sample, plan, fo);
  tape.backward(fr.total);

  // Tensors on the always-active path; one probed entry each.
  const std::size_t bin0 = bin_index(plan.tau.at(0), ccfg.tau_max, ccfg.bins);
  const std::vector<std::pair<std::string, std::size_t>> picks = {
      {"proj.w1", 3},
      {"proj.b1", 1},
      {"proj.w2", 5},
      {"tok_embed", question_token(cfg, 0) * cfg.hidden_dim + 2},
      {"pos_embed", 4},
      {"cond.mask", 2},
      {"cond.noise", bin0 * cfg.hidden_dim + 3},
      {"layer0.ln1.g", 1},
      {"layer0.attn.wq", 7},
      {"layer0.attn.bv", 0},
      {"layer0.mlp.w1", 11},
      {"layer0.mlp.b2", 3},
      {"layer1.attn.wo", 9},
      {"layer1.ln2.b", 2},
      {"layer1.mlp.w2", 6},
      {"final.ln.g", 5},
      {"lm_head.w", 13},
      {"lm_head.b", 4},
      {"dec.w1", 8},
      {"dec.w2", 10},
  };
  constexpr double kH = 1e-4;
  double worst = 0.0;
  for (const auto& [name, flat] : picks) {
    const Matrix grad = tape.grad(pv.at(name));
    TrainState hi = st, lo = st;
    hi.params.at(name).data.at(flat) += kH;
    lo.params.at(name).data.at(flat) -= kH;
    const double fd = (objective(hi) - objective(lo)) / (2.0 * kH);
    worst = std::max(worst, rel_err(grad.data.at(flat), fd));
  }
  return worst;
}

}  // namespace gradcheck_detail

inline int cmd_gradcheck(std::uint64_t seed, bool inject_sign_error = false,
                         std::string* report_out = nullptr) {
  constexpr double kLossTol = 1e-5;
  constexpr double kCompositeTol = 1e-4;
  struct Row {
    const char* name;
    double err;
    double tol;
  };
  std::vector<Row> rows;
  try {
    rows.push_back({"rec", gradcheck_detail::check_loss("rec", seed, inject_sign_error), kLossTol});
    rows.push_back({"rel", gradcheck_detail::check_loss("rel", seed, false), kLossTol});
    rows.push_back({"con", gradcheck_detail::check_loss("con", seed, false), kLossTol});
    rows.push_back({"composite", gradcheck_detail::check_composite(seed), kCompositeTol});
  } catch (const std::exception& e) {
    std::cerr << "gradcheck: " << e.what() << '\n';
    return kExitNumeric;
  }
  bool all_pass = true;
  char line[128];
  std::snprintf(line, sizeof(line), "gradcheck seed %llu\n",
                static_cast<unsigned long long>(seed));
  std::string report = line;
  for (const auto& row : rows) {
    const bool pass = row.err <= row.tol;
    all_pass = all_pass && pass;
    std::snprintf(line, sizeof(line), "%-9s max rel err %.3e  tol %.0e  %s\n", row.name,
                  row.err, row.tol, pass ? "PASS" : "FAIL");
    report += line;
  }
  report += all_pass ? "all gradients verified\n" : "gradient verification FAILED\n";
  std::fputs(report.c_str(), stdout);
  if (report_out) *report_out = report;
  return all_pass ? kExitOk : kExitVerify;
}

inline int cmd_plot(const std::string& metrics_path, const std::string& out_path) {
  std::string svg;
  try {
    const auto bytes = read_file_bytes(metrics_path);
    const CsvTable table = parse_csv(std::string(bytes.begin(), bytes.end()));
    svg = render_metrics_svg(table);
  } catch (const std::exception& e) {
    std::cerr << "plot: " << e.what() << '\n';
    return kExitUsage;
  }
  try {
    write_text_file(out_path, svg);
  } catch (const std::exception& e) {
    std::cerr << "plot: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace ldn
