#include "cdn/train/batch.hpp"

#include <algorithm>

#include "cdn/error.hpp"

namespace cdn::train {

std::vector<RankingGroup> encode_groups(const std::vector<data::DialogueExample>& examples,
                                        std::size_t max_len, std::size_t max_utts) {
  std::vector<RankingGroup> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    RankingGroup g;
    for (std::size_t c = 0; c < ex.candidates.size(); ++c) {
      g.candidates.push_back(data::encode_example(ex, c, max_len, max_utts));
      g.labels.push_back(ex.candidates[c].label);
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<RankingGroup> encode_groups(
    const std::vector<std::vector<data::DialogueExample>>& groups, std::size_t max_len,
    std::size_t max_utts) {
  std::vector<RankingGroup> out;
  out.reserve(groups.size());
  for (const auto& group : groups) {
    RankingGroup g;
    for (const auto& ex : group) {
      for (std::size_t c = 0; c < ex.candidates.size(); ++c) {
        g.candidates.push_back(data::encode_example(ex, c, max_len, max_utts));
        g.labels.push_back(ex.candidates[c].label);
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

data::EncodedSequence trim_padding(const data::EncodedSequence& seq, std::size_t length) {
  if (length < seq.valid_count()) throw ContractError("trim_padding would drop valid positions");
  auto out = seq;
  auto fit = [length](auto& v, auto fill) { v.resize(length, fill); };
  fit(out.ids, data::kPad);
  fit(out.utt_index, 0);
  fit(out.speaker, 0);
  fit(out.valid, std::uint8_t{0});
  fit(out.word_start, std::uint8_t{0});
  return out;
}

namespace {

std::size_t longest(const std::vector<const data::EncodedSequence*>& seqs) {
  std::size_t n = 0;
  for (const auto* s : seqs) n = std::max(n, s->valid_count());
  return n;
}

}  // namespace

Batch pad_pointwise(const std::vector<const data::EncodedSequence*>& seqs,
                    const std::vector<int>& labels) {
  if (seqs.size() != labels.size()) throw ContractError("pad_pointwise: label count mismatch");
  Batch b;
  b.length = longest(seqs);
  for (const auto* s : seqs) b.sequences.push_back(trim_padding(*s, b.length));
  b.labels = labels;
  return b;
}

Batch pad_multichoice(const std::vector<const RankingGroup*>& groups) {
  std::vector<const data::EncodedSequence*> all;
  for (const auto* g : groups) {
    for (const auto& s : g->candidates) all.push_back(&s);
  }
  Batch b;
  b.length = longest(all);
  for (const auto* g : groups) {
    const auto gold = std::find(g->labels.begin(), g->labels.end(), 1);
    if (gold == g->labels.end()) throw ContractError("multichoice group without a positive");
    b.gold.push_back(static_cast<int>(gold - g->labels.begin()));
    b.group_sizes.push_back(g->candidates.size());
    for (const auto& s : g->candidates) b.sequences.push_back(trim_padding(s, b.length));
    b.labels.insert(b.labels.end(), g->labels.begin(), g->labels.end());
  }
  return b;
}

}  // namespace cdn::train
