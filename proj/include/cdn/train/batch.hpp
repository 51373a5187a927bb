#pragma once

#include <cstddef>
#include <vector>

#include "cdn/data/encoding.hpp"

namespace cdn::train {

/// Candidates of one context, encoded, with their 0/1 labels.
struct RankingGroup {
  std::vector<data::EncodedSequence> candidates;
  std::vector<int> labels;
};

/// Multichoice examples, one group each.
std::vector<RankingGroup> encode_groups(const std::vector<data::DialogueExample>& examples,
                                        std::size_t max_len, std::size_t max_utts);

/// Pointwise groups (one single-candidate example per line of a group).
std::vector<RankingGroup> encode_groups(
    const std::vector<std::vector<data::DialogueExample>>& groups, std::size_t max_len,
    std::size_t max_utts);

/// Drops trailing padding so the sequence is exactly `length` long.
/// ContractError if that would cut a valid position.
data::EncodedSequence trim_padding(const data::EncodedSequence& seq, std::size_t length);

struct Batch {
  std::vector<data::EncodedSequence> sequences;  // all padded to `length`
  std::vector<int> labels;                        // pointwise: per sequence
  std::vector<std::size_t> group_sizes;           // multichoice: candidates per example
  std::vector<int> gold;                          // multichoice: gold index per example
  std::size_t length = 0;
};

/// Pads (or trims padding) to the longest valid length in the batch.
/// Padding is masked out everywhere in the model, so this only saves work.
Batch pad_pointwise(const std::vector<const data::EncodedSequence*>& seqs,
                    const std::vector<int>& labels);
Batch pad_multichoice(const std::vector<const RankingGroup*>& groups);

}  // namespace cdn::train
