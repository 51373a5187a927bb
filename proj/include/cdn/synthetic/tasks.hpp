#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdn/data/dialogue.hpp"
#include "cdn/data/vocab.hpp"

namespace cdn::synthetic {

enum class SyntheticTask { speaker_echo, utterance_order };

const char* to_string(SyntheticTask t);
SyntheticTask parse_task(const std::string& s);

struct SyntheticSpec {
  SyntheticTask task = SyntheticTask::speaker_echo;
  std::size_t vocab_size = 40;  // content tokens: keywords and fillers
  std::size_t n_utts = 4;
  std::size_t n_candidates = 4;
  std::size_t filler_len = 2;  // filler tokens per utterance
  std::size_t n_train = 2000;
  std::size_t n_dev = 200;
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError
};

// Token inventory: "k<i>" keywords, "x<i>" fillers and, for
// utterance_order, the marker "mk".
std::vector<std::string> keyword_tokens(const SyntheticSpec& spec);
std::vector<std::string> filler_tokens(const SyntheticSpec& spec);
data::Vocab synthetic_vocab(const SyntheticSpec& spec);

/// speaker_echo: two tagged speakers with equal turn counts in random order.
/// Every utterance of a speaker starts with that speaker's keyword. The
/// response is tagged with one speaker (the sender); the positive option
/// repeats the sender's keyword, one distractor the other speaker's, the
/// rest unseen keywords.
///
/// utterance_order: two marker utterances "mk <kw>" among filler
/// utterances, speakers tagged at random. The positive repeats the later
/// marker's keyword, one distractor the earlier one's.
std::vector<data::RawDialogue> generate(const SyntheticSpec& spec, std::size_t count,
                                        std::uint64_t seed);

struct SyntheticSplit {
  std::vector<data::RawDialogue> train;
  std::vector<data::RawDialogue> dev;
};

/// Train and dev from independent streams derived from spec.seed.
SyntheticSplit generate_split(const SyntheticSpec& spec);

/// Expected R@1 of a scorer that counts candidate tokens present in the
/// context, with ties broken uniformly at random (in expectation).
double bag_of_tokens_expected_r1(const std::vector<data::RawDialogue>& dialogues);

}  // namespace cdn::synthetic
