#include "cdn/synthetic/tasks.hpp"

#include <algorithm>
#include <map>

#include "cdn/error.hpp"
#include "cdn/rng.hpp"

namespace cdn::synthetic {

const char* to_string(SyntheticTask t) {
  return t == SyntheticTask::speaker_echo ? "speaker_echo" : "utterance_order";
}

SyntheticTask parse_task(const std::string& s) {
  if (s == "speaker_echo") return SyntheticTask::speaker_echo;
  if (s == "utterance_order") return SyntheticTask::utterance_order;
  throw ConfigError("unknown synthetic task '" + s + "'");
}

namespace {

std::size_t n_keywords(const SyntheticSpec& spec) { return spec.vocab_size / 2; }

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

// Distinct keyword indices, uniformly.
std::vector<std::size_t> draw_distinct(std::size_t pool, std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(pool);
  for (std::size_t i = 0; i < pool; ++i) idx[i] = i;
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.index(pool - i)]);
  idx.resize(n);
  return idx;
}

std::vector<std::string> fillers(const std::vector<std::string>& pool, std::size_t n, Rng& rng) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pool[rng.index(pool.size())]);
  return out;
}

// Candidates: positive, distractor, then unseen keywords; the positive lands
// in a uniformly random slot and the rest keep a shuffled order.
std::vector<data::RawCandidate> make_options(std::vector<std::string> texts,
                                             const std::optional<std::string>& tag, Rng& rng) {
  std::vector<data::RawCandidate> out;
  for (std::size_t i = 0; i < texts.size(); ++i) out.push_back({tag, texts[i], i == 0 ? 1 : 0});
  rng.shuffle(std::span(out));
  return out;
}

data::RawDialogue speaker_echo(const SyntheticSpec& spec, const std::vector<std::string>& kws,
                               const std::vector<std::string>& fill, Rng& rng) {
  const auto picked = draw_distinct(kws.size(), spec.n_candidates, rng);
  // picked[0] is the sender's keyword, picked[1] the receiver's.
  std::vector<int> turns(spec.n_utts);
  for (std::size_t i = 0; i < turns.size(); ++i) turns[i] = i < spec.n_utts / 2 ? 0 : 1;
  rng.shuffle(std::span(turns));
  const bool sender_is_f = rng.bernoulli(0.5);
  const std::string tags[2] = {sender_is_f ? "f" : "m", sender_is_f ? "m" : "f"};

  data::RawDialogue d;
  d.kind = data::TaskKind::multichoice;
  for (int who : turns) {
    std::vector<std::string> words{kws[picked[static_cast<std::size_t>(who)]]};
    auto f = fillers(fill, spec.filler_len, rng);
    words.insert(words.end(), f.begin(), f.end());
    d.context.push_back({tags[who], join(words)});
  }
  std::vector<std::string> texts;
  for (auto i : picked) texts.push_back(kws[i]);
  d.candidates = make_options(std::move(texts), tags[0], rng);
  return d;
}

data::RawDialogue utterance_order(const SyntheticSpec& spec, const std::vector<std::string>& kws,
                                  const std::vector<std::string>& fill, Rng& rng) {
  const auto picked = draw_distinct(kws.size(), spec.n_candidates, rng);
  // Two distinct utterance slots for the markers; picked[0] goes to the later.
  const auto slots = draw_distinct(spec.n_utts, 2, rng);
  const auto early = std::min(slots[0], slots[1]);
  const auto late = std::max(slots[0], slots[1]);

  data::RawDialogue d;
  d.kind = data::TaskKind::multichoice;
  for (std::size_t u = 0; u < spec.n_utts; ++u) {
    std::vector<std::string> words;
    if (u == early || u == late) {
      words = {"mk", kws[picked[u == late ? 0 : 1]]};
      auto f = fillers(fill, spec.filler_len - 1, rng);
      words.insert(words.end(), f.begin(), f.end());
    } else {
      words = fillers(fill, spec.filler_len + 1, rng);
    }
    // Random speakers, so speaker masks carry no trace of utterance order.
    d.context.push_back({rng.bernoulli(0.5) ? "f" : "m", join(words)});
  }
  std::vector<std::string> texts;
  for (auto i : picked) texts.push_back(kws[i]);
  d.candidates = make_options(std::move(texts), rng.bernoulli(0.5) ? "f" : "m", rng);
  return d;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (vocab_size < 20) throw ConfigError("synthetic vocab_size must be >= 20");
  if (n_candidates < 2) throw ConfigError("n_candidates must be >= 2");
  if (n_candidates > vocab_size / 2) throw ConfigError("more candidates than keywords");
  if (filler_len < 1) throw ConfigError("filler_len must be >= 1");
  if (task == SyntheticTask::speaker_echo && (n_utts < 2 || n_utts % 2 != 0)) {
    throw ConfigError("speaker_echo needs an even n_utts >= 2 (balanced turns)");
  }
  if (task == SyntheticTask::utterance_order && n_utts < 2) {
    throw ConfigError("utterance_order needs n_utts >= 2");
  }
}

std::vector<std::string> keyword_tokens(const SyntheticSpec& spec) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n_keywords(spec); ++i) out.push_back("k" + std::to_string(i));
  return out;
}

std::vector<std::string> filler_tokens(const SyntheticSpec& spec) {
  std::vector<std::string> out;
  for (std::size_t i = n_keywords(spec); i < spec.vocab_size; ++i) {
    out.push_back("x" + std::to_string(i - n_keywords(spec)));
  }
  return out;
}

data::Vocab synthetic_vocab(const SyntheticSpec& spec) {
  data::Vocab v;
  for (const auto& t : keyword_tokens(spec)) v.add(t);
  for (const auto& t : filler_tokens(spec)) v.add(t);
  v.add("mk");
  return v;
}

std::vector<data::RawDialogue> generate(const SyntheticSpec& spec, std::size_t count,
                                        std::uint64_t seed) {
  spec.validate();
  const auto kws = keyword_tokens(spec);
  const auto fill = filler_tokens(spec);
  Rng rng(seed);
  std::vector<data::RawDialogue> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(spec.task == SyntheticTask::speaker_echo ? speaker_echo(spec, kws, fill, rng)
                                                           : utterance_order(spec, kws, fill, rng));
  }
  return out;
}

SyntheticSplit generate_split(const SyntheticSpec& spec) {
  Rng root(spec.seed);
  const auto train_seed = root.next();
  const auto dev_seed = root.next();
  return {generate(spec, spec.n_train, train_seed), generate(spec, spec.n_dev, dev_seed)};
}

double bag_of_tokens_expected_r1(const std::vector<data::RawDialogue>& dialogues) {
  if (dialogues.empty()) return 0.0;
  double total = 0.0;
  for (const auto& d : dialogues) {
    std::map<std::string, int> counts;
    for (const auto& u : d.context) {
      for (const auto& w : data::split_whitespace(u.text)) ++counts[w];
    }
    std::vector<int> scores;
    int best = -1;
    for (const auto& c : d.candidates) {
      int s = 0;
      for (const auto& w : data::split_whitespace(c.text)) {
        auto it = counts.find(w);
        if (it != counts.end()) s += it->second;
      }
      scores.push_back(s);
      best = std::max(best, s);
    }
    int tied = 0;
    bool gold_tied = false;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] == best) {
        ++tied;
        gold_tied = gold_tied || d.candidates[i].label == 1;
      }
    }
    total += gold_tied ? 1.0 / tied : 0.0;
  }
  return total / static_cast<double>(dialogues.size());
}

}  // namespace cdn::synthetic
