#include "cdn/model/config.hpp"

#include <charconv>
#include <sstream>

#include "cdn/error.hpp"

namespace cdn::model {

namespace {

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("invalid integer for " + key + ": '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("invalid number for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const char* to_string(Aggregation v) { return v == Aggregation::max ? "max" : "mean"; }

const char* to_string(GateVariant v) {
  switch (v) {
    case GateVariant::full: return "full";
    case GateVariant::no_gate: return "no_gate";
    case GateVariant::no_original_info: return "no_original_info";
    case GateVariant::no_original_no_gate: return "no_original_no_gate";
  }
  return "?";
}

const char* to_string(ChannelAblation v) {
  switch (v) {
    case ChannelAblation::both: return "both";
    case ChannelAblation::utterance_only: return "utterance_only";
    case ChannelAblation::speaker_only: return "speaker_only";
  }
  return "?";
}

const char* to_string(Integration v) {
  switch (v) {
    case Integration::bigru: return "bigru";
    case Integration::max_pool: return "max_pool";
    case Integration::mean_pool: return "mean_pool";
  }
  return "?";
}

Aggregation parse_aggregation(const std::string& s) {
  if (s == "max") return Aggregation::max;
  if (s == "mean") return Aggregation::mean;
  throw ConfigError("unknown aggregation '" + s + "'");
}

GateVariant parse_gate_variant(const std::string& s) {
  for (auto v : {GateVariant::full, GateVariant::no_gate, GateVariant::no_original_info,
                 GateVariant::no_original_no_gate})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown gate variant '" + s + "'");
}

ChannelAblation parse_channel_ablation(const std::string& s) {
  for (auto v : {ChannelAblation::both, ChannelAblation::utterance_only,
                 ChannelAblation::speaker_only})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown channel ablation '" + s + "'");
}

Integration parse_integration(const std::string& s) {
  for (auto v : {Integration::bigru, Integration::max_pool, Integration::mean_pool})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown integration '" + s + "'");
}

const char* to_string(PositionMode v) {
  return v == PositionMode::absolute ? "absolute" : "per_utterance";
}

PositionMode parse_position_mode(const std::string& s) {
  if (s == "absolute") return PositionMode::absolute;
  if (s == "per_utterance") return PositionMode::per_utterance;
  throw ConfigError("unknown position mode '" + s + "'");
}

void ModelConfig::validate() const {
  if (vocab_size <= 5) throw ConfigError("vocab_size must exceed the 5 special tokens");
  if (d == 0 || heads == 0 || d % heads != 0) throw ConfigError("d must be a positive multiple of heads");
  if (n_decoupling_blocks < 1) throw ConfigError("n_decoupling_blocks must be >= 1");
  if (n_bigru_layers < 1) throw ConfigError("n_bigru_layers must be >= 1");
  if (max_len < 4) throw ConfigError("max_len must be >= 4");
  if (max_utts < 1) throw ConfigError("max_utts must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

std::string ModelConfig::serialize() const {
  std::ostringstream os;
  os.precision(17);
  os << "vocab_size = " << vocab_size << '\n'
     << "d = " << d << '\n'
     << "heads = " << heads << '\n'
     << "encoder_layers = " << encoder_layers << '\n'
     << "ffn_hidden = " << ffn_hidden << '\n'
     << "n_decoupling_blocks = " << n_decoupling_blocks << '\n'
     << "n_bigru_layers = " << n_bigru_layers << '\n'
     << "aggregation = " << to_string(aggregation) << '\n'
     << "gate_variant = " << to_string(gate_variant) << '\n'
     << "channel_ablation = " << to_string(channel_ablation) << '\n'
     << "integration = " << to_string(integration) << '\n'
     << "decoupling_residual = " << (decoupling_residual ? "true" : "false") << '\n'
     << "positions = " << to_string(positions) << '\n'
     << "max_len = " << max_len << '\n'
     << "max_utts = " << max_utts << '\n'
     << "dropout = " << dropout << '\n';
  return os.str();
}

void ModelConfig::set(const std::string& key, const std::string& value) {
  if (key == "vocab_size") vocab_size = parse_size(key, value);
  else if (key == "d") d = parse_size(key, value);
  else if (key == "heads") heads = parse_size(key, value);
  else if (key == "encoder_layers") encoder_layers = parse_size(key, value);
  else if (key == "ffn_hidden") ffn_hidden = parse_size(key, value);
  else if (key == "n_decoupling_blocks") n_decoupling_blocks = parse_size(key, value);
  else if (key == "n_bigru_layers") n_bigru_layers = parse_size(key, value);
  else if (key == "aggregation") aggregation = parse_aggregation(value);
  else if (key == "gate_variant") gate_variant = parse_gate_variant(value);
  else if (key == "channel_ablation") channel_ablation = parse_channel_ablation(value);
  else if (key == "integration") integration = parse_integration(value);
  else if (key == "decoupling_residual") decoupling_residual = parse_bool(key, value);
  else if (key == "positions") positions = parse_position_mode(value);
  else if (key == "max_len") max_len = parse_size(key, value);
  else if (key == "max_utts") max_utts = parse_size(key, value);
  else if (key == "dropout") dropout = parse_double(key, value);
  else throw ConfigError("unknown model config key '" + key + "'");
}

ModelConfig ModelConfig::parse(const std::string& text) {
  ModelConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value, got '" + line + "'");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

std::size_t parameter_count(const ModelConfig& c) {
  const std::size_t d = c.d, v = c.vocab_size, f = c.ffn_dim();
  std::size_t n = 0;
  // Encoder: embeddings, embedding norm, layers.
  n += v * d + c.max_len * d + 2 * d;
  n += c.encoder_layers * (4 * d * d + 2 * d + (d * f + f) + (f * d + d) + 2 * d);
  // Decoupling: four channels per block, each with Q/K/V heads and W^O.
  const std::size_t per_channel = 4 * d * d + (c.decoupling_residual ? 2 * d : 0);
  n += c.n_decoupling_blocks * 4 * per_channel;
  // Two gates.
  std::size_t gate = 0;
  switch (c.gate_variant) {
    case GateVariant::full:
    case GateVariant::no_gate: gate = 2 * (4 * d * d + d) + (2 * d * d + d); break;
    case GateVariant::no_original_info: gate = 2 * (d * d + d) + (2 * d * d + d); break;
    case GateVariant::no_original_no_gate: gate = 2 * d * d + d; break;
  }
  n += 2 * gate;
  // Two BiGRUs.
  if (c.integration == Integration::bigru) {
    for (std::size_t layer = 0; layer < c.n_bigru_layers; ++layer) {
      const std::size_t in = layer == 0 ? d : 2 * d;
      n += 2 * 2 * (3 * in * d + 3 * d * d + 4 * d);
    }
  }
  // Channel fusion, classifier, post-training heads.
  n += d * 2 * c.channel_dim() + d;
  n += d + 1;
  n += v + d + 1;
  return n;
}

}  // namespace cdn::model
