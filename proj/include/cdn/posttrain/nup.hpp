#pragma once

#include <cstddef>
#include <vector>

#include "cdn/data/dialogue.hpp"
#include "cdn/posttrain/masking.hpp"

namespace cdn::posttrain {

/// Utterances that negatives are drawn from. Throws ConfigError when it
/// holds fewer than two distinct utterances (a negative could never differ).
class NegativePool {
 public:
  explicit NegativePool(std::vector<std::vector<int>> utterances);
  static NegativePool from_dialogues(const std::vector<data::DialogueExample>& dialogues);

  std::size_t size() const { return utterances_.size(); }
  const std::vector<int>& at(std::size_t i) const { return utterances_[i]; }

 private:
  std::vector<std::vector<int>> utterances_;
};

/// For k = 2..n: the prefix u_1..u_{k-1} with u_k (label 1) and with a pool
/// utterance differing from u_k (label 0). Dialogues of one utterance yield
/// nothing.
std::vector<PosttrainExample> sample_nup_pairs(const data::DialogueExample& dialogue,
                                               const NegativePool& pool, Rng& rng,
                                               std::size_t max_len,
                                               std::size_t max_utts = data::kDefaultMaxUtts);

/// Whole dialogue (context plus its single candidate, if any) as one sequence.
std::vector<data::Utterance> dialogue_utterances(const data::DialogueExample& dialogue);

/// The full post-training stream for a corpus: per dialogue, one MLM
/// example over the whole dialogue followed by its NUP pairs. One seed
/// drives everything, so the stream is reproducible byte for byte.
std::vector<PosttrainExample> build_posttrain_stream(
    const std::vector<data::DialogueExample>& dialogues, const MaskingPolicy& policy,
    std::size_t vocab_size, std::size_t max_len, std::size_t max_utts = data::kDefaultMaxUtts);

}  // namespace cdn::posttrain
