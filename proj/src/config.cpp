#include "distinct/config.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace distinct {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<std::size_t> to_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_uint(key, trim(item)));
  if (out.empty()) throw ConfigError("config key '" + key + "': expected a comma-separated list");
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::unsupervised: return "unsupervised";
    case TrainMode::weakly_supervised: return "weakly-supervised";
    case TrainMode::without_attention: return "w/o-Atten";
    case TrainMode::without_contrastive: return "w/o-Cont";
    case TrainMode::center_contrastive: return "A-Center-Cont";
  }
  return "unsupervised";
}

TrainMode parse_mode(const std::string& text) {
  if (text == "unsupervised") return TrainMode::unsupervised;
  if (text == "weakly-supervised" || text == "weak") return TrainMode::weakly_supervised;
  if (text == "w/o-Atten" || text == "ablation:w/o-Atten" || text == "no-attention") return TrainMode::without_attention;
  if (text == "w/o-Cont" || text == "ablation:w/o-Cont" || text == "no-contrastive") return TrainMode::without_contrastive;
  if (text == "A-Center-Cont" || text == "ablation:A-Center-Cont" || text == "center") return TrainMode::center_contrastive;
  throw ConfigError("unknown training mode '" + text + "'");
}

EncoderConfig TrainConfig::effective_encoder() const {
  EncoderConfig e = encoder;
  if (mode == TrainMode::without_attention) e.attention = false;
  return e;
}

bool TrainConfig::uses_contrastive() const {
  return mode != TrainMode::without_contrastive && mode != TrainMode::weakly_supervised;
}

void TrainConfig::validate() const {
  encoder.validate();
  if (clusters == 0) throw ConfigError("clusters must be positive");
  if (points < 8) throw ConfigError("points must be at least 8");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(margin > 0.0)) throw ConfigError("margin must be positive");
  if (alpha < 0.0 || beta < 0.0) throw ConfigError("alpha and beta must be non-negative");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(spectral.sigma > 0.0)) throw ConfigError("spectral_sigma must be positive");
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line;
  for (std::size_t lineno = 1; std::getline(ss, line); ++lineno) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

TrainConfig apply_config(TrainConfig c, const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "clusters") c.clusters = to_uint(k, v);
    else if (k == "points") c.points = to_uint(k, v);
    else if (k == "channels") c.encoder.channels = to_uint(k, v);
    else if (k == "r1") c.encoder.r1 = to_double(k, v);
    else if (k == "r2") c.encoder.r2 = to_double(k, v);
    else if (k == "max_neighbors") c.encoder.max_neighbors = to_uint(k, v);
    else if (k == "downsample") c.encoder.downsample = to_double(k, v);
    else if (k == "interp_k") c.encoder.interp_k = to_uint(k, v);
    else if (k == "l1_widths") c.encoder.l1_widths = to_list(k, v);
    else if (k == "l2_widths") c.encoder.l2_widths = to_list(k, v);
    else if (k == "up_widths") c.encoder.up_widths = to_list(k, v);
    else if (k == "attention_reduction") c.encoder.attention_reduction = to_uint(k, v);
    else if (k == "attention") c.encoder.attention = to_bool(k, v);
    else if (k == "tau") c.tau = to_double(k, v);
    else if (k == "margin") c.margin = to_double(k, v);
    else if (k == "alpha") c.alpha = to_double(k, v);
    else if (k == "beta") c.beta = to_double(k, v);
    else if (k == "lr") c.lr = to_double(k, v);
    else if (k == "epochs") c.epochs = to_uint(k, v);
    else if (k == "batch_size") c.batch_size = to_uint(k, v);
    else if (k == "seed") c.seed = to_uint(k, v);
    else if (k == "mode") c.mode = parse_mode(v);
    else if (k == "classes") c.classes = to_uint(k, v);
    else if (k == "augment_rotate") c.augment.rotate_up = to_bool(k, v);
    else if (k == "augment_tilt_deg") c.augment.max_tilt_deg = to_double(k, v);
    else if (k == "augment_scale_min") c.augment.scale_min = to_double(k, v);
    else if (k == "augment_scale_max") c.augment.scale_max = to_double(k, v);
    else if (k == "augment_shift") c.augment.shift = to_double(k, v);
    else if (k == "augment_jitter") c.augment.jitter_sigma = to_double(k, v);
    else if (k == "augment_clip") c.augment.jitter_clip = to_double(k, v);
    else if (k == "resample_jitter") c.resample.jitter_sigma = to_double(k, v);
    else if (k == "resample_clip") c.resample.jitter_clip = to_double(k, v);
    else if (k == "spectral_sigma") c.spectral.sigma = to_double(k, v);
    else if (k == "kmeans_restarts") c.spectral.kmeans_restarts = to_uint(k, v);
    else throw ConfigError("unknown config key '" + k + "'");
  }
  return c;
}

std::string serialize_config(const TrainConfig& c) {
  std::ostringstream os;
  os << "clusters=" << c.clusters << '\n'
     << "points=" << c.points << '\n'
     << "channels=" << c.encoder.channels << '\n'
     << "r1=" << fmt(c.encoder.r1) << '\n'
     << "r2=" << fmt(c.encoder.r2) << '\n'
     << "max_neighbors=" << c.encoder.max_neighbors << '\n'
     << "downsample=" << fmt(c.encoder.downsample) << '\n'
     << "interp_k=" << c.encoder.interp_k << '\n'
     << "l1_widths=" << join(c.encoder.l1_widths) << '\n'
     << "l2_widths=" << join(c.encoder.l2_widths) << '\n'
     << "up_widths=" << join(c.encoder.up_widths) << '\n'
     << "attention_reduction=" << c.encoder.attention_reduction << '\n'
     << "attention=" << (c.encoder.attention ? "true" : "false") << '\n'
     << "tau=" << fmt(c.tau) << '\n'
     << "margin=" << fmt(c.margin) << '\n'
     << "alpha=" << fmt(c.alpha) << '\n'
     << "beta=" << fmt(c.beta) << '\n'
     << "lr=" << fmt(c.lr) << '\n'
     << "epochs=" << c.epochs << '\n'
     << "batch_size=" << c.batch_size << '\n'
     << "seed=" << c.seed << '\n'
     << "mode=" << to_string(c.mode) << '\n'
     << "classes=" << c.classes << '\n'
     << "augment_rotate=" << (c.augment.rotate_up ? "true" : "false") << '\n'
     << "augment_tilt_deg=" << fmt(c.augment.max_tilt_deg) << '\n'
     << "augment_scale_min=" << fmt(c.augment.scale_min) << '\n'
     << "augment_scale_max=" << fmt(c.augment.scale_max) << '\n'
     << "augment_shift=" << fmt(c.augment.shift) << '\n'
     << "augment_jitter=" << fmt(c.augment.jitter_sigma) << '\n'
     << "augment_clip=" << fmt(c.augment.jitter_clip) << '\n'
     << "resample_jitter=" << fmt(c.resample.jitter_sigma) << '\n'
     << "resample_clip=" << fmt(c.resample.jitter_clip) << '\n'
     << "spectral_sigma=" << fmt(c.spectral.sigma) << '\n'
     << "kmeans_restarts=" << c.spectral.kmeans_restarts << '\n';
  return os.str();
}

}  // namespace distinct
