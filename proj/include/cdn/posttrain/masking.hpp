#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdn/data/encoding.hpp"
#include "cdn/rng.hpp"

namespace cdn::posttrain {

enum class MaskLevel { subword, whole_word, span };

const char* to_string(MaskLevel level);
MaskLevel parse_mask_level(const std::string& s);

struct MaskingPolicy {
  MaskLevel level = MaskLevel::subword;
  double mask_ratio = 0.15;
  // Fate of a selected position: [MASK], a random token, or unchanged.
  double p_mask = 0.8;
  double p_random = 0.1;
  double p_keep = 0.1;
  double span_p = 0.2;
  std::size_t span_max_len = 10;
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError
};

enum class ExampleKind : std::uint8_t { mlm = 0, nup = 1 };

struct MlmTarget {
  int position;
  int id;  // original token at that position
  bool operator==(const MlmTarget&) const = default;
};

/// Post-training instance. `ids` is the valid prefix of an encoded
/// sequence ([CLS] ... [SEP]); MLM examples carry targets, NUP examples a
/// 0/1 label.
struct PosttrainExample {
  ExampleKind kind = ExampleKind::mlm;
  std::vector<int> ids;
  std::vector<MlmTarget> targets;
  int label = 0;
  bool operator==(const PosttrainExample&) const = default;
};

/// Number of positions to mask out of `maskable`: ceil(ratio * maskable).
std::size_t mask_budget(double ratio, std::size_t maskable);

/// Span length from Geometric(p) on {1, 2, ...} truncated at max_len.
std::size_t sample_span_length(double p, std::size_t max_len, Rng& rng);

/// Mean of that truncated distribution, in closed form.
double truncated_geometric_mean(double p, std::size_t max_len);

/// Selects positions per policy and corrupts them. Returns nullopt when the
/// sequence has no maskable (valid, non-special) position.
std::optional<PosttrainExample> apply_mlm_mask(const data::EncodedSequence& seq,
                                               const MaskingPolicy& policy, Rng& rng,
                                               std::size_t vocab_size);

}  // namespace cdn::posttrain
