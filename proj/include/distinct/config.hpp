#pragma once

// Training configuration and its flat key=value text form.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

#include "distinct/clustering.hpp"
#include "distinct/encoder.hpp"
#include "distinct/geometry.hpp"
#include "distinct/objective.hpp"
#include "distinct/synth.hpp"

namespace distinct {

enum class TrainMode {
  unsupervised,
  weakly_supervised,
  without_attention,    ///< "w/o-Atten"
  without_contrastive,  ///< "w/o-Cont"
  center_contrastive,   ///< "A-Center-Cont"
};

std::string to_string(TrainMode mode);
/// Accepts the canonical names and the ablation labels ("w/o-Atten", ...).
TrainMode parse_mode(const std::string& text);

struct TrainConfig {
  std::size_t clusters = 2;  ///< C
  std::size_t points = 256;  ///< N
  EncoderConfig encoder;
  double tau = kDefaultTemperature;
  double margin = kDefaultMargin;
  double alpha = kDefaultAlpha;
  double beta = kDefaultBeta;
  double lr = 0.01;
  std::size_t epochs = 30;
  std::size_t batch_size = 10;
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::unsupervised;
  std::size_t classes = 0;  ///< supervised head outputs (weak supervision only)
  AugmentConfig augment;
  ResampleOptions resample;
  SpectralConfig spectral;

  /// Encoder config with the mode's attention switch applied.
  EncoderConfig effective_encoder() const;
  bool uses_contrastive() const;
  void validate() const;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parses "key=value" lines; '#' starts a comment; blank lines ignored.
/// Throws ConfigError with the line number on malformed input.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Applies known keys onto `base`. Unknown keys or unparsable values throw ConfigError.
TrainConfig apply_config(TrainConfig base, const std::map<std::string, std::string>& kv);

/// Every field as key=value lines (round-trips through parse_key_values + apply_config).
std::string serialize_config(const TrainConfig& cfg);

}  // namespace distinct
