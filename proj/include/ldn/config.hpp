#pragma once

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ldn/image_corruption.hpp"
#include "ldn/protocol.hpp"
#include "ldn/train.hpp"

namespace ldn {

// Everything a run needs, loadable from flat `key = value` text. Unspecified
// keys keep the struct defaults; unknown keys are rejected outright.
struct RunConfig {
  TrainRunConfig train;
  ProtocolConfig protocol;
  std::string out_dir;  // empty: take the directory from the command line
};

inline SaliencyMode saliency_from_string(const std::string& name) {
  if (name == "cls_attention") return SaliencyMode::cls_attention;
  if (name == "received_attention") return SaliencyMode::received_attention;
  if (name == "feature_surrogate") return SaliencyMode::feature_surrogate;
  throw std::invalid_argument("unknown saliency mode: " + name);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

inline double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": " + value);
  }
  if (used != value.size())
    throw std::invalid_argument("config: trailing junk after " + key + ": " + value);
  return v;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
    throw std::invalid_argument("config: bad unsigned integer for " + key + ": " + value);
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": " + value);
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  bool saw_supervise_layer = false;
  std::set<std::string> seen;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": empty key or value");
    if (!seen.insert(key).second)
      throw std::invalid_argument("config: duplicate key " + key);

    auto& model = cfg.train.model;
    auto& cor = cfg.train.corruption;
    if (key == "patch_grid") model.patch_grid = detail::parse_uint(key, value);
    else if (key == "patch_size") model.patch_size = detail::parse_uint(key, value);
    else if (key == "visual_dim") model.visual_dim = detail::parse_uint(key, value);
    else if (key == "hidden_dim") model.hidden_dim = detail::parse_uint(key, value);
    else if (key == "target_dim") model.target_dim = detail::parse_uint(key, value);
    else if (key == "layers") model.layers = detail::parse_uint(key, value);
    else if (key == "heads") model.heads = detail::parse_uint(key, value);
    else if (key == "vocab") model.vocab = detail::parse_uint(key, value);
    else if (key == "supervise_layer") {
      model.supervise_layer = detail::parse_uint(key, value);
      saw_supervise_layer = true;
    } else if (key == "max_text") model.max_text = detail::parse_uint(key, value);
    else if (key == "seed") model.seed = detail::parse_uint(key, value);
    else if (key == "saliency") model.saliency = saliency_from_string(value);
    else if (key == "noise_rate") cor.noise_rate = detail::parse_double(key, value);
    else if (key == "mask_rate") cor.mask_rate = detail::parse_double(key, value);
    else if (key == "sigma") cor.sigma = detail::parse_double(key, value);
    else if (key == "tau_max") cor.tau_max = detail::parse_double(key, value);
    else if (key == "saliency_temp") cor.saliency_temp = detail::parse_double(key, value);
    else if (key == "bins") cor.bins = detail::parse_uint(key, value);
    else if (key == "lambda_rec") cfg.train.weights.rec = detail::parse_double(key, value);
    else if (key == "lambda_rel") cfg.train.weights.rel = detail::parse_double(key, value);
    else if (key == "lambda_con") cfg.train.weights.con = detail::parse_double(key, value);
    else if (key == "tau_rel") cfg.train.temps.relation = detail::parse_double(key, value);
    else if (key == "tau_con") cfg.train.temps.contrast = detail::parse_double(key, value);
    else if (key == "whd_warmup") cfg.train.whd.warmup_frac = detail::parse_double(key, value);
    else if (key == "whd_hold") cfg.train.whd.hold_frac = detail::parse_double(key, value);
    else if (key == "whd_decay") cfg.train.whd.decay_frac = detail::parse_double(key, value);
    else if (key == "lr") cfg.train.adam.lr = detail::parse_double(key, value);
    else if (key == "beta1") cfg.train.adam.beta1 = detail::parse_double(key, value);
    else if (key == "beta2") cfg.train.adam.beta2 = detail::parse_double(key, value);
    else if (key == "adam_eps") cfg.train.adam.eps = detail::parse_double(key, value);
    else if (key == "steps") cfg.train.steps = detail::parse_uint(key, value);
    else if (key == "batch") cfg.train.batch = detail::parse_uint(key, value);
    else if (key == "dataset_size") cfg.train.dataset_size = detail::parse_uint(key, value);
    else if (key == "probe_size") cfg.train.probe_size = detail::parse_uint(key, value);
    else if (key == "probe_interval") cfg.train.probe_interval = detail::parse_uint(key, value);
    else if (key == "latent_supervision")
      cfg.train.latent_supervision = detail::parse_bool(key, value);
    else if (key == "family") cfg.protocol.family = family_from_string(value);
    else if (key == "severity")
      cfg.protocol.severity = static_cast<int>(detail::parse_uint(key, value));
    else if (key == "protocol_seed") cfg.protocol.seed = detail::parse_uint(key, value);
    else if (key == "out_dir") cfg.out_dir = value;
    else throw std::invalid_argument("config: unknown key " + key);
  }
  // Supervision taps the middle of the stack unless placed explicitly.
  if (!saw_supervise_layer)
    cfg.train.model.supervise_layer = std::max<std::size_t>(1, cfg.train.model.layers / 2);
  return cfg;
}

inline std::string serialize_run_config(const RunConfig& cfg) {
  using detail::format_double;
  const auto& t = cfg.train;
  std::string out;
  auto put = [&out](const std::string& key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  out += "# model\n";
  put("patch_grid", std::to_string(t.model.patch_grid));
  put("patch_size", std::to_string(t.model.patch_size));
  put("visual_dim", std::to_string(t.model.visual_dim));
  put("hidden_dim", std::to_string(t.model.hidden_dim));
  put("target_dim", std::to_string(t.model.target_dim));
  put("layers", std::to_string(t.model.layers));
  put("heads", std::to_string(t.model.heads));
  put("vocab", std::to_string(t.model.vocab));
  put("supervise_layer", std::to_string(t.model.supervise_layer));
  put("max_text", std::to_string(t.model.max_text));
  put("seed", std::to_string(t.model.seed));
  put("saliency", to_string(t.model.saliency));
  out += "# corruption\n";
  put("noise_rate", format_double(t.corruption.noise_rate));
  put("mask_rate", format_double(t.corruption.mask_rate));
  put("sigma", format_double(t.corruption.sigma));
  put("tau_max", format_double(t.corruption.tau_max));
  put("saliency_temp", format_double(t.corruption.saliency_temp));
  put("bins", std::to_string(t.corruption.bins));
  out += "# objective\n";
  put("lambda_rec", format_double(t.weights.rec));
  put("lambda_rel", format_double(t.weights.rel));
  put("lambda_con", format_double(t.weights.con));
  put("tau_rel", format_double(t.temps.relation));
  put("tau_con", format_double(t.temps.contrast));
  put("whd_warmup", format_double(t.whd.warmup_frac));
  put("whd_hold", format_double(t.whd.hold_frac));
  put("whd_decay", format_double(t.whd.decay_frac));
  out += "# optimizer\n";
  put("lr", format_double(t.adam.lr));
  put("beta1", format_double(t.adam.beta1));
  put("beta2", format_double(t.adam.beta2));
  put("adam_eps", format_double(t.adam.eps));
  out += "# run\n";
  put("steps", std::to_string(t.steps));
  put("batch", std::to_string(t.batch));
  put("dataset_size", std::to_string(t.dataset_size));
  put("probe_size", std::to_string(t.probe_size));
  put("probe_interval", std::to_string(t.probe_interval));
  put("latent_supervision", t.latent_supervision ? "true" : "false");
  if (!cfg.out_dir.empty()) put("out_dir", cfg.out_dir);
  out += "# corruption protocol\n";
  put("family", to_string(cfg.protocol.family));
  put("severity", std::to_string(cfg.protocol.severity));
  put("protocol_seed", std::to_string(cfg.protocol.seed));
  return out;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace ldn
