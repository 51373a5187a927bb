#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "cdn/data/dialogue.hpp"

namespace cdn::data {

inline constexpr std::size_t kDefaultMaxUtts = 20;

/// Model input: [CLS] u_1 [SEP] ... u_k [SEP] response [SEP] [PAD]...
///
/// utt_index and speaker give the utterance and speaker role of every
/// position. [CLS] belongs to segment 0; each [SEP] belongs to the segment
/// it closes. Padding positions carry utt_index/speaker 0 and valid 0.
struct EncodedSequence {
  std::vector<int> ids;
  std::vector<int> utt_index;
  std::vector<int> speaker;
  std::vector<std::uint8_t> valid;
  std::vector<std::uint8_t> word_start;  // 0 for specials and padding
  int n_utts = 0;  // context segments + the response segment

  std::size_t length() const { return ids.size(); }
  std::size_t valid_count() const;
};

/// One "longest first" trim: drop the oldest context token when the context
/// is at least as long as the response, otherwise the last response token.
void longest_first_step(std::vector<int>& ctx, std::vector<int>& resp);

/// Applies longest_first_step until ctx.size() + resp.size() <= budget.
std::pair<std::vector<int>, std::vector<int>> truncate_longest_first(std::vector<int> ctx,
                                                                     std::vector<int> resp,
                                                                     std::size_t budget);

/// Encodes context + candidate `cand_idx`, keeping the last `max_utts`
/// utterances, trimming longest-first to fit `max_len` and padding to it.
/// Throws MalformedExampleError if the response is (or becomes) empty and
/// ContractError on a bad index or max_len < 4.
EncodedSequence encode_example(const DialogueExample& ex, std::size_t cand_idx,
                               std::size_t max_len, std::size_t max_utts = kDefaultMaxUtts);

/// Inverse of encode_example on the valid prefix: one context utterance per
/// segment, the last segment as a single candidate with an explicit speaker.
DialogueExample decode_sequence(const EncodedSequence& seq);

/// Throws ContractError when a layout invariant fails.
void check_invariants(const EncodedSequence& seq, std::size_t max_utts = kDefaultMaxUtts);

}  // namespace cdn::data
