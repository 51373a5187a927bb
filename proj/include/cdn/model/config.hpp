#pragma once

#include <cstddef>
#include <string>

namespace cdn::model {

enum class Aggregation { max, mean };
enum class GateVariant { full, no_gate, no_original_info, no_original_no_gate };
enum class ChannelAblation { both, utterance_only, speaker_only };
// How the sequence of utterance vectors becomes one channel vector.
enum class Integration { bigru, max_pool, mean_pool };
// Position ids fed to the position embedding: the token index, or the
// offset within the token's segment (restarting after every [SEP]).
enum class PositionMode { absolute, per_utterance };

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d = 32;
  std::size_t heads = 2;
  std::size_t encoder_layers = 1;
  std::size_t ffn_hidden = 0;  // 0 means 4 * d
  std::size_t n_decoupling_blocks = 1;
  std::size_t n_bigru_layers = 1;
  Aggregation aggregation = Aggregation::max;
  GateVariant gate_variant = GateVariant::full;
  ChannelAblation channel_ablation = ChannelAblation::both;
  Integration integration = Integration::bigru;
  bool decoupling_residual = false;
  PositionMode positions = PositionMode::absolute;
  std::size_t max_len = 256;
  std::size_t max_utts = 20;
  double dropout = 0.0;

  std::size_t ffn_dim() const { return ffn_hidden ? ffn_hidden : 4 * d; }
  std::size_t head_dim() const { return d / heads; }
  // Width of one channel's dialogue vector (v_1 / v_2).
  std::size_t channel_dim() const { return integration == Integration::bigru ? 2 * d : d; }

  /// Throws ConfigError when an invariant fails.
  void validate() const;

  /// "key = value" lines in a fixed key order.
  std::string serialize() const;
  static ModelConfig parse(const std::string& text);

  /// Applies one key/value; throws ConfigError for unknown keys or values.
  void set(const std::string& key, const std::string& value);

  bool operator==(const ModelConfig&) const = default;
};

const char* to_string(Aggregation v);
const char* to_string(GateVariant v);
const char* to_string(ChannelAblation v);
const char* to_string(Integration v);
const char* to_string(PositionMode v);

Aggregation parse_aggregation(const std::string& s);
GateVariant parse_gate_variant(const std::string& s);
ChannelAblation parse_channel_ablation(const std::string& s);
Integration parse_integration(const std::string& s);
PositionMode parse_position_mode(const std::string& s);

/// Number of scalar parameters a model with this config owns.
std::size_t parameter_count(const ModelConfig& config);

}  // namespace cdn::model
