#include "cdn/data/encoding.hpp"

#include <algorithm>
#include <deque>

#include "cdn/error.hpp"

namespace cdn::data {

std::size_t EncodedSequence::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), 1));
}

void longest_first_step(std::vector<int>& ctx, std::vector<int>& resp) {
  if (!ctx.empty() && ctx.size() >= resp.size()) {
    ctx.erase(ctx.begin());
  } else if (!resp.empty()) {
    resp.pop_back();
  }
}

std::pair<std::vector<int>, std::vector<int>> truncate_longest_first(std::vector<int> ctx,
                                                                     std::vector<int> resp,
                                                                     std::size_t budget) {
  while (ctx.size() + resp.size() > budget) longest_first_step(ctx, resp);
  return {std::move(ctx), std::move(resp)};
}

namespace {

struct Piece {
  int id;
  std::uint8_t word_start;
};

struct Segment {
  int speaker;
  std::deque<Piece> pieces;
};

}  // namespace

EncodedSequence encode_example(const DialogueExample& ex, std::size_t cand_idx,
                               std::size_t max_len, std::size_t max_utts) {
  if (cand_idx >= ex.candidates.size()) {
    throw ContractError("candidate index " + std::to_string(cand_idx) + " out of range");
  }
  if (max_len < 4) throw ContractError("max_len must be >= 4 to hold the special tokens");
  const Candidate& cand = ex.candidates[cand_idx];
  if (cand.tokens.empty()) throw MalformedExampleError("empty response");

  const std::size_t first = ex.context.size() > max_utts ? ex.context.size() - max_utts : 0;
  std::deque<Segment> ctx;
  for (std::size_t i = first; i < ex.context.size(); ++i) {
    const auto& u = ex.context[i];
    if (u.tokens.empty()) continue;
    Segment seg{u.speaker, {}};
    for (std::size_t k = 0; k < u.tokens.size(); ++k) {
      seg.pieces.push_back({u.tokens[k], k < u.word_start.size() ? u.word_start[k] : std::uint8_t{1}});
    }
    ctx.push_back(std::move(seg));
  }
  const int last_speaker = ctx.empty() ? -1 : ctx.back().speaker;
  const int resp_speaker =
      cand.speaker ? *cand.speaker : (last_speaker < 0 ? kSender : 1 - last_speaker);

  std::vector<Piece> resp;
  for (std::size_t k = 0; k < cand.tokens.size(); ++k) {
    resp.push_back({cand.tokens[k], k < cand.word_start.size() ? cand.word_start[k] : std::uint8_t{1}});
  }

  // Trim one token at a time; emptied context utterances disappear and give
  // their [SEP] back to the budget.
  std::size_t ctx_len = 0;
  for (const auto& s : ctx) ctx_len += s.pieces.size();
  auto specials = [&] { return 2 + ctx.size(); };
  while (ctx_len + resp.size() + specials() > max_len) {
    if (ctx_len > 0 && ctx_len >= resp.size()) {
      ctx.front().pieces.pop_front();
      --ctx_len;
      if (ctx.front().pieces.empty()) ctx.pop_front();
    } else {
      resp.pop_back();
    }
  }
  if (resp.empty()) throw MalformedExampleError("response empty after truncation");

  EncodedSequence seq;
  seq.ids.reserve(max_len);
  auto push = [&seq](int id, int utt, int spk, std::uint8_t ws) {
    seq.ids.push_back(id);
    seq.utt_index.push_back(utt);
    seq.speaker.push_back(spk);
    seq.valid.push_back(1);
    seq.word_start.push_back(ws);
  };
  const int first_speaker = ctx.empty() ? resp_speaker : ctx.front().speaker;
  push(kCls, 0, first_speaker, 0);
  int utt = 0;
  for (const auto& s : ctx) {
    for (const auto& p : s.pieces) push(p.id, utt, s.speaker, p.word_start);
    push(kSep, utt, s.speaker, 0);
    ++utt;
  }
  for (const auto& p : resp) push(p.id, utt, resp_speaker, p.word_start);
  push(kSep, utt, resp_speaker, 0);
  seq.n_utts = utt + 1;

  while (seq.ids.size() < max_len) {
    seq.ids.push_back(kPad);
    seq.utt_index.push_back(0);
    seq.speaker.push_back(0);
    seq.valid.push_back(0);
    seq.word_start.push_back(0);
  }
  return seq;
}

DialogueExample decode_sequence(const EncodedSequence& seq) {
  DialogueExample ex;
  ex.kind = TaskKind::pointwise;
  std::vector<Utterance> segments(static_cast<std::size_t>(seq.n_utts));
  for (std::size_t i = 0; i < seq.length(); ++i) {
    if (!seq.valid[i] || is_special(seq.ids[i])) continue;
    auto& u = segments.at(static_cast<std::size_t>(seq.utt_index[i]));
    u.tokens.push_back(seq.ids[i]);
    u.word_start.push_back(seq.word_start[i]);
  }
  for (std::size_t i = 0; i < seq.length(); ++i) {
    if (seq.valid[i] && seq.ids[i] == kSep) segments.at(seq.utt_index[i]).speaker = seq.speaker[i];
  }
  for (int k = 0; k + 1 < seq.n_utts; ++k) ex.context.push_back(segments[k]);
  Candidate cand;
  cand.tokens = segments.back().tokens;
  cand.word_start = segments.back().word_start;
  cand.label = 1;
  cand.speaker = segments.back().speaker;
  ex.candidates.push_back(std::move(cand));
  return ex;
}

void check_invariants(const EncodedSequence& seq, std::size_t max_utts) {
  const std::size_t l = seq.length();
  if (seq.utt_index.size() != l || seq.speaker.size() != l || seq.valid.size() != l ||
      seq.word_start.size() != l) {
    throw ContractError("per-position arrays differ in length");
  }
  std::size_t n_valid = 0;
  while (n_valid < l && seq.valid[n_valid]) ++n_valid;
  for (std::size_t i = n_valid; i < l; ++i)
    if (seq.valid[i]) throw ContractError("valid positions do not form a prefix");
  if (n_valid < 3 || seq.ids[0] != kCls) throw ContractError("sequence must start with [CLS]");
  if (seq.n_utts < 1 || static_cast<std::size_t>(seq.n_utts) > max_utts + 1) {
    throw ContractError("n_utts out of range");
  }
  int prev = 0;
  for (std::size_t i = 0; i < n_valid; ++i) {
    const int t = seq.utt_index[i];
    if (t < prev) throw ContractError("utterance index decreases");
    if (t > prev && seq.ids[i - 1] != kSep) throw ContractError("segment not closed by [SEP]");
    if (seq.speaker[i] != 0 && seq.speaker[i] != 1) throw ContractError("speaker not in {0,1}");
    prev = t;
  }
  if (prev + 1 != seq.n_utts) throw ContractError("max utterance index != n_utts - 1");
  if (seq.ids[n_valid - 1] != kSep) throw ContractError("last segment not closed by [SEP]");
  for (std::size_t i = 1; i + 1 < n_valid; ++i) {
    if (seq.ids[i] == kSep && seq.utt_index[i + 1] == seq.utt_index[i]) {
      throw ContractError("[SEP] inside a segment");
    }
  }
}

}  // namespace cdn::data
