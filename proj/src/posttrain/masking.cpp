#include "cdn/posttrain/masking.hpp"

#include <algorithm>
#include <cmath>

#include "cdn/error.hpp"

namespace cdn::posttrain {

const char* to_string(MaskLevel level) {
  switch (level) {
    case MaskLevel::subword: return "subword";
    case MaskLevel::whole_word: return "whole_word";
    case MaskLevel::span: return "span";
  }
  return "?";
}

MaskLevel parse_mask_level(const std::string& s) {
  if (s == "subword") return MaskLevel::subword;
  if (s == "whole_word") return MaskLevel::whole_word;
  if (s == "span") return MaskLevel::span;
  throw ConfigError("unknown mask level '" + s + "'");
}

void MaskingPolicy::validate() const {
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw ConfigError("mask_ratio must be in (0, 1)");
  if (p_mask < 0 || p_random < 0 || p_keep < 0 ||
      std::abs(p_mask + p_random + p_keep - 1.0) > 1e-9) {
    throw ConfigError("replacement probabilities must be non-negative and sum to 1");
  }
  if (!(span_p > 0.0 && span_p <= 1.0)) throw ConfigError("span_p must be in (0, 1]");
  if (span_max_len < 1) throw ConfigError("span_max_len must be >= 1");
}

std::size_t mask_budget(double ratio, std::size_t maskable) {
  // The epsilon keeps 0.15 * 100 from rounding up to 16.
  const double raw = ratio * static_cast<double>(maskable);
  auto n = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(n, maskable);
}

std::size_t sample_span_length(double p, std::size_t max_len, Rng& rng) {
  // Rejection keeps the truncated law exact (renormalized over 1..max_len).
  for (;;) {
    std::size_t len = 1;
    while (len <= max_len && !rng.bernoulli(p)) ++len;
    if (len <= max_len) return len;
  }
}

double truncated_geometric_mean(double p, std::size_t max_len) {
  double mass = 0.0, moment = 0.0;
  for (std::size_t k = 1; k <= max_len; ++k) {
    const double pk = p * std::pow(1.0 - p, static_cast<double>(k - 1));
    mass += pk;
    moment += static_cast<double>(k) * pk;
  }
  return moment / mass;
}

namespace {

bool maskable_at(const data::EncodedSequence& seq, std::size_t i) {
  return seq.valid[i] && !data::is_special(seq.ids[i]);
}

std::vector<std::size_t> select_subword(const std::vector<std::size_t>& maskable,
                                        std::size_t budget, Rng& rng) {
  auto pool = maskable;
  // Partial Fisher-Yates: the first `budget` slots are a uniform subset.
  for (std::size_t i = 0; i < budget; ++i) {
    std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
  }
  pool.resize(budget);
  return pool;
}

std::vector<std::size_t> select_whole_word(const data::EncodedSequence& seq,
                                           const std::vector<std::size_t>& maskable,
                                           std::size_t budget, Rng& rng) {
  // A word is a maskable position with word_start set plus the maskable
  // continuation pieces directly after it.
  std::vector<std::vector<std::size_t>> words;
  for (auto pos : maskable) {
    const bool continues = !words.empty() && !seq.word_start[pos] && words.back().back() + 1 == pos;
    if (continues) {
      words.back().push_back(pos);
    } else {
      words.push_back({pos});
    }
  }
  rng.shuffle(std::span(words));
  std::vector<std::size_t> chosen;
  for (const auto& w : words) {
    if (chosen.size() == budget) break;
    if (chosen.size() + w.size() > budget) continue;
    chosen.insert(chosen.end(), w.begin(), w.end());
  }
  return chosen;
}

std::vector<std::size_t> select_span(const data::EncodedSequence& seq,
                                     const std::vector<std::size_t>& maskable, std::size_t budget,
                                     const MaskingPolicy& policy, Rng& rng) {
  std::vector<std::uint8_t> taken(seq.length(), 0);
  std::vector<std::size_t> chosen;
  while (chosen.size() < budget) {
    const auto len = sample_span_length(policy.span_p, policy.span_max_len, rng);
    const auto start = maskable[rng.index(maskable.size())];
    // Grow right from the start, staying inside its utterance.
    for (std::size_t pos = start, n = 0; n < len && chosen.size() < budget; ++pos, ++n) {
      if (pos >= seq.length() || !maskable_at(seq, pos) ||
          seq.utt_index[pos] != seq.utt_index[start]) {
        break;
      }
      if (!taken[pos]) {
        taken[pos] = 1;
        chosen.push_back(pos);
      }
    }
  }
  return chosen;
}

}  // namespace

std::optional<PosttrainExample> apply_mlm_mask(const data::EncodedSequence& seq,
                                               const MaskingPolicy& policy, Rng& rng,
                                               std::size_t vocab_size) {
  if (vocab_size <= static_cast<std::size_t>(data::kNumSpecials)) {
    throw ConfigError("vocabulary has no ordinary tokens to sample replacements from");
  }
  std::vector<std::size_t> maskable;
  for (std::size_t i = 0; i < seq.length(); ++i) {
    if (maskable_at(seq, i)) maskable.push_back(i);
  }
  if (maskable.empty()) return std::nullopt;
  const auto budget = mask_budget(policy.mask_ratio, maskable.size());

  std::vector<std::size_t> chosen;
  switch (policy.level) {
    case MaskLevel::subword: chosen = select_subword(maskable, budget, rng); break;
    case MaskLevel::whole_word: chosen = select_whole_word(seq, maskable, budget, rng); break;
    case MaskLevel::span: chosen = select_span(seq, maskable, budget, policy, rng); break;
  }
  std::sort(chosen.begin(), chosen.end());

  PosttrainExample ex;
  ex.kind = ExampleKind::mlm;
  ex.ids.assign(seq.ids.begin(), seq.ids.begin() + static_cast<std::ptrdiff_t>(seq.valid_count()));
  const auto n_ordinary = vocab_size - data::kNumSpecials;
  for (auto pos : chosen) {
    ex.targets.push_back({static_cast<int>(pos), ex.ids[pos]});
    const double u = rng.uniform();
    if (u < policy.p_mask) {
      ex.ids[pos] = data::kMask;
    } else if (u < policy.p_mask + policy.p_random) {
      ex.ids[pos] = data::kNumSpecials + static_cast<int>(rng.index(n_ordinary));
    }
  }
  return ex;
}

}  // namespace cdn::posttrain
