#pragma once

// Random dialogues, encoded sequences and tensors for property tests.

#include <vector>

#include "cdn/data/encoding.hpp"
#include "cdn/numeric/tensor.hpp"
#include "cdn/rng.hpp"

namespace testing {

inline cdn::nn::Tensor<double> random_tensor(cdn::Rng& rng, cdn::nn::Shape shape,
                                             double scale = 1.0, bool requires_grad = true) {
  std::vector<double> v(cdn::nn::shape_size(shape));
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return cdn::nn::Tensor<double>(std::move(shape), std::move(v), requires_grad);
}

inline cdn::nn::Tensor<float> random_tensor_f(cdn::Rng& rng, cdn::nn::Shape shape,
                                              double scale = 1.0) {
  std::vector<float> v(cdn::nn::shape_size(shape));
  for (auto& x : v) x = static_cast<float>(rng.uniform(-scale, scale));
  return cdn::nn::Tensor<float>(std::move(shape), std::move(v), true);
}

// Context of 1..max_utts utterances with 1..max_words tokens each, random
// speakers, one candidate per requested count (label 1 on the first).
inline cdn::data::DialogueExample random_dialogue(cdn::Rng& rng, std::size_t vocab_size,
                                                  std::size_t max_utts = 6,
                                                  std::size_t max_words = 5,
                                                  std::size_t n_candidates = 1) {
  cdn::data::DialogueExample ex;
  ex.kind = n_candidates > 1 ? cdn::data::TaskKind::multichoice : cdn::data::TaskKind::pointwise;
  auto word = [&] { return cdn::data::kNumSpecials + static_cast<int>(rng.index(vocab_size - cdn::data::kNumSpecials)); };
  const auto n = 1 + rng.index(max_utts);
  for (std::size_t u = 0; u < n; ++u) {
    cdn::data::Utterance utt;
    utt.speaker = static_cast<int>(rng.index(2));
    const auto len = 1 + rng.index(max_words);
    for (std::size_t t = 0; t < len; ++t) {
      utt.tokens.push_back(word());
      utt.word_start.push_back(t == 0 || rng.bernoulli(0.6) ? 1 : 0);
    }
    ex.context.push_back(std::move(utt));
  }
  for (std::size_t c = 0; c < n_candidates; ++c) {
    cdn::data::Candidate cand;
    const auto len = 1 + rng.index(max_words);
    for (std::size_t t = 0; t < len; ++t) {
      cand.tokens.push_back(word());
      cand.word_start.push_back(1);
    }
    cand.label = c == 0 ? 1 : 0;
    if (rng.bernoulli(0.5)) cand.speaker = static_cast<int>(rng.index(2));
    ex.candidates.push_back(std::move(cand));
  }
  return ex;
}

inline cdn::data::EncodedSequence random_sequence(cdn::Rng& rng, std::size_t vocab_size,
                                                  std::size_t max_len, std::size_t max_utts = 6,
                                                  std::size_t max_words = 5) {
  return cdn::data::encode_example(random_dialogue(rng, vocab_size, max_utts, max_words), 0, max_len);
}

}  // namespace testing
