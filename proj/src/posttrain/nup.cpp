#include "cdn/posttrain/nup.hpp"

#include <set>

#include "cdn/error.hpp"

namespace cdn::posttrain {

NegativePool::NegativePool(std::vector<std::vector<int>> utterances)
    : utterances_(std::move(utterances)) {
  std::set<std::vector<int>> distinct(utterances_.begin(), utterances_.end());
  if (distinct.size() < 2) {
    throw ConfigError("negative pool needs at least 2 distinct utterances, has " +
                      std::to_string(distinct.size()));
  }
}

std::vector<data::Utterance> dialogue_utterances(const data::DialogueExample& dialogue) {
  auto utts = dialogue.context;
  if (dialogue.candidates.size() == 1) {
    const auto& c = dialogue.candidates.front();
    data::Utterance u;
    u.tokens = c.tokens;
    u.word_start = c.word_start;
    u.speaker = c.speaker.value_or(utts.empty() ? data::kSender : 1 - utts.back().speaker);
    utts.push_back(std::move(u));
  }
  return utts;
}

NegativePool NegativePool::from_dialogues(const std::vector<data::DialogueExample>& dialogues) {
  std::vector<std::vector<int>> all;
  for (const auto& d : dialogues) {
    for (auto& u : dialogue_utterances(d)) {
      if (!u.tokens.empty()) all.push_back(std::move(u.tokens));
    }
  }
  return NegativePool(std::move(all));
}

namespace {

PosttrainExample encode_pair(const std::vector<data::Utterance>& utts, std::size_t k,
                             const std::vector<int>& response, int label, std::size_t max_len,
                             std::size_t max_utts) {
  data::DialogueExample ex;
  ex.kind = data::TaskKind::pointwise;
  ex.context.assign(utts.begin(), utts.begin() + static_cast<std::ptrdiff_t>(k - 1));
  data::Candidate c;
  c.tokens = response;
  c.word_start.assign(response.size(), 1);
  if (response == utts[k - 1].tokens) c.word_start = utts[k - 1].word_start;
  c.label = label;
  c.speaker = utts[k - 1].speaker;
  ex.candidates.push_back(std::move(c));
  auto seq = data::encode_example(ex, 0, max_len, max_utts);
  PosttrainExample out;
  out.kind = ExampleKind::nup;
  out.ids.assign(seq.ids.begin(), seq.ids.begin() + static_cast<std::ptrdiff_t>(seq.valid_count()));
  out.label = label;
  return out;
}

}  // namespace

std::vector<PosttrainExample> sample_nup_pairs(const data::DialogueExample& dialogue,
                                               const NegativePool& pool, Rng& rng,
                                               std::size_t max_len, std::size_t max_utts) {
  const auto utts = dialogue_utterances(dialogue);
  std::vector<PosttrainExample> out;
  for (std::size_t k = 2; k <= utts.size(); ++k) {
    const auto& truth = utts[k - 1].tokens;
    if (truth.empty()) continue;
    const std::vector<int>* negative = &pool.at(rng.index(pool.size()));
    while (*negative == truth) negative = &pool.at(rng.index(pool.size()));
    out.push_back(encode_pair(utts, k, truth, 1, max_len, max_utts));
    out.push_back(encode_pair(utts, k, *negative, 0, max_len, max_utts));
  }
  return out;
}

std::vector<PosttrainExample> build_posttrain_stream(
    const std::vector<data::DialogueExample>& dialogues, const MaskingPolicy& policy,
    std::size_t vocab_size, std::size_t max_len, std::size_t max_utts) {
  policy.validate();
  const auto pool = NegativePool::from_dialogues(dialogues);
  Rng rng(policy.seed);
  std::vector<PosttrainExample> stream;
  for (const auto& d : dialogues) {
    const auto utts = dialogue_utterances(d);
    if (utts.size() >= 2 && !utts.back().tokens.empty()) {
      data::DialogueExample whole;
      whole.context.assign(utts.begin(), utts.end() - 1);
      whole.candidates.push_back({utts.back().tokens, utts.back().word_start, 1, utts.back().speaker});
      const auto seq = data::encode_example(whole, 0, max_len, max_utts);
      if (auto ex = apply_mlm_mask(seq, policy, rng, vocab_size)) stream.push_back(std::move(*ex));
    }
    for (auto& ex : sample_nup_pairs(d, pool, rng, max_len, max_utts)) stream.push_back(std::move(ex));
  }
  return stream;
}

}  // namespace cdn::posttrain
