#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <map>
#include <set>
#include <sstream>

#include "cdn/data/loaders.hpp"
#include "cdn/error.hpp"
#include "cdn/metrics/ranking.hpp"
#include "cdn/rng.hpp"
#include "cdn/synthetic/tasks.hpp"

using namespace cdn;
using namespace cdn::synthetic;

namespace {

std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

int positive_slot(const data::RawDialogue& d) {
  int slot = -1, count = 0;
  for (std::size_t i = 0; i < d.candidates.size(); ++i)
    if (d.candidates[i].label == 1) {
      slot = static_cast<int>(i);
      ++count;
    }
  return count == 1 ? slot : -1;
}

// Ranks candidates by how many of their tokens occur in the context and
// averages the tie-aware chance of the positive coming first.
double bag_of_tokens_oracle(const std::vector<data::RawDialogue>& ds) {
  double total = 0.0;
  for (const auto& d : ds) {
    std::multiset<std::string> ctx;
    for (const auto& u : d.context)
      for (const auto& w : words(u.text)) ctx.insert(w);
    std::vector<std::size_t> overlap;
    for (const auto& c : d.candidates) {
      std::size_t n = 0;
      for (const auto& w : words(c.text)) n += ctx.count(w) > 0;
      overlap.push_back(n);
    }
    const auto best = *std::max_element(overlap.begin(), overlap.end());
    const auto tied = static_cast<double>(std::count(overlap.begin(), overlap.end(), best));
    if (overlap[positive_slot(d)] == best) total += 1.0 / tied;
  }
  return total / static_cast<double>(ds.size());
}

// A scorer blind to order: mean of random token vectors over the context
// against the candidate's mean vector.
double position_blind_r1(const std::vector<data::RawDialogue>& ds, std::uint64_t seed) {
  Rng rng(seed);
  std::map<std::string, std::vector<double>> emb;
  auto vec = [&](const std::string& w) -> const std::vector<double>& {
    auto& v = emb[w];
    if (v.empty()) {
      v.resize(16);
      for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    }
    return v;
  };
  auto mean_of = [&](const std::vector<std::string>& ws) {
    std::vector<double> m(16, 0.0);
    for (const auto& w : ws)
      for (std::size_t i = 0; i < 16; ++i) m[i] += vec(w)[i] / static_cast<double>(ws.size());
    return m;
  };
  metrics::RankedRun run;
  for (const auto& d : ds) {
    std::vector<std::string> ctx;
    for (const auto& u : d.context)
      for (const auto& w : words(u.text)) ctx.push_back(w);
    const auto c = mean_of(ctx);
    metrics::RankedGroup g;
    for (const auto& cand : d.candidates) {
      const auto r = mean_of(words(cand.text));
      double s = 0.0;
      for (std::size_t i = 0; i < 16; ++i) s += c[i] * r[i];
      g.scores.push_back(s);
      g.labels.push_back(cand.label);
    }
    run.groups.push_back(std::move(g));
  }
  return metrics::mean_recall_at_k(run, 1);
}

double slot_uniformity_p(const SyntheticSpec& spec, std::size_t n) {
  std::vector<double> counts(spec.n_candidates, 0.0);
  for (const auto& d : generate(spec, n, spec.seed)) counts[positive_slot(d)] += 1.0;
  const double expected = static_cast<double>(n) / static_cast<double>(spec.n_candidates);
  double stat = 0.0;
  for (double c : counts) stat += (c - expected) * (c - expected) / expected;
  boost::math::chi_squared dist(static_cast<double>(spec.n_candidates - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace

TEST_SUITE("synthetic tasks") {
  TEST_CASE("spec validation") {
    SyntheticSpec s;
    CHECK_NOTHROW(s.validate());
    s.vocab_size = 10;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.n_candidates = 1;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.n_utts = 3;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK(parse_task("utterance_order") == SyntheticTask::utterance_order);
    CHECK_THROWS_AS(parse_task("echo"), ConfigError);
  }

  TEST_CASE("same seed, same stream; exactly one positive each") {
    for (auto task : {SyntheticTask::speaker_echo, SyntheticTask::utterance_order}) {
      SyntheticSpec s;
      s.task = task;
      std::stringstream a, b, c;
      data::write_multichoice_json(a, generate(s, 200, 3));
      data::write_multichoice_json(b, generate(s, 200, 3));
      data::write_multichoice_json(c, generate(s, 200, 4));
      CHECK(a.str() == b.str());
      CHECK(a.str() != c.str());
      for (const auto& d : generate(s, 200, 3)) {
        CHECK(positive_slot(d) >= 0);
        CHECK(d.candidates.size() == s.n_candidates);
        CHECK(d.context.size() == s.n_utts);
      }
      const auto split = generate_split(s);
      CHECK(split.train.size() == s.n_train);
      CHECK(split.dev.size() == s.n_dev);
    }
  }

  TEST_CASE("speaker-blind bag of tokens is at chance with two options") {
    SyntheticSpec s;
    s.n_candidates = 2;
    const auto ds = generate(s, 2000, 7);
    CHECK(bag_of_tokens_oracle(ds) == 0.5);
    CHECK(bag_of_tokens_expected_r1(ds) == 0.5);
  }

  TEST_CASE("order-blind scorer is at chance on utterance order") {
    SyntheticSpec s;
    s.task = SyntheticTask::utterance_order;
    s.n_candidates = 2;
    const auto ds = generate(s, 2000, 8);
    CHECK(bag_of_tokens_oracle(ds) == 0.5);
    const double r1 = position_blind_r1(ds, 9);
    INFO("order-blind R_2@1 ", r1);
    CHECK(std::abs(r1 - 0.5) <= 0.05);
  }

  TEST_CASE("the positive's slot is uniform") {
    for (auto task : {SyntheticTask::speaker_echo, SyntheticTask::utterance_order}) {
      SyntheticSpec s;
      s.task = task;
      s.seed = 10;
      const double p = slot_uniformity_p(s, 10000);
      INFO(to_string(task), " p = ", p);
      CHECK(p > 0.01);
    }
  }

  TEST_CASE("all options have the same length") {
    for (auto task : {SyntheticTask::speaker_echo, SyntheticTask::utterance_order}) {
      SyntheticSpec s;
      s.task = task;
      for (const auto& d : generate(s, 500, 11)) {
        const auto n = words(d.candidates[0].text).size();
        for (const auto& c : d.candidates) CHECK(words(c.text).size() == n);
      }
    }
  }

  TEST_CASE("generated data goes through the multichoice loader unchanged") {
    SyntheticSpec s;
    const auto ds = generate(s, 50, 12);
    std::stringstream io;
    data::write_multichoice_json(io, ds);
    const auto back = data::parse_multichoice_json(io);
    REQUIRE(back.size() == ds.size());
    const auto vocab = synthetic_vocab(s);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      REQUIRE(back[i].context.size() == ds[i].context.size());
      for (std::size_t u = 0; u < ds[i].context.size(); ++u) {
        CHECK(back[i].context[u].text == ds[i].context[u].text);
        CHECK(back[i].context[u].tag == ds[i].context[u].tag);
      }
      for (std::size_t c = 0; c < ds[i].candidates.size(); ++c) {
        CHECK(back[i].candidates[c].text == ds[i].candidates[c].text);
        CHECK(back[i].candidates[c].label == ds[i].candidates[c].label);
      }
      // Every token is in the synthetic vocabulary.
      const auto ex = data::tokenize_dialogue(back[i], vocab, data::TokenizeMode::word);
      for (const auto& u : ex.context)
        for (int id : u.tokens) CHECK(id != data::kUnk);
    }
  }
}
