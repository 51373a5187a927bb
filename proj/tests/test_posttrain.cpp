#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "cdn/error.hpp"
#include "cdn/posttrain/losses.hpp"
#include "cdn/posttrain/masking.hpp"
#include "cdn/posttrain/nup.hpp"
#include "cdn/posttrain/records.hpp"
#include "support/random_data.hpp"

using namespace cdn;
using namespace cdn::posttrain;

namespace {

constexpr std::size_t kVocab = 60;

data::EncodedSequence long_sequence(Rng& rng) {
  for (;;) {
    try {
      return testing::random_sequence(rng, kVocab, 256, 20, 12);
    } catch (const MalformedExampleError&) {
    }
  }
}

std::size_t maskable_count(const data::EncodedSequence& seq) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < seq.length(); ++i) n += seq.valid[i] && !data::is_special(seq.ids[i]);
  return n;
}

// Mean of Geometric(p) on {1, 2, ...} truncated at n, in closed form.
double span_mean_oracle(double p, std::size_t n) {
  const double q = 1.0 - p, N = static_cast<double>(n);
  return (1.0 - (N + 1.0) * std::pow(q, N) + N * std::pow(q, N + 1.0)) / (p * (1.0 - std::pow(q, N)));
}

data::DialogueExample dialogue_of(std::vector<std::vector<int>> utts) {
  data::DialogueExample d;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    data::Utterance u;
    u.speaker = static_cast<int>(i % 2);
    u.tokens = utts[i];
    u.word_start.assign(utts[i].size(), 1);
    d.context.push_back(u);
  }
  return d;
}

}  // namespace

TEST_SUITE("masking") {
  TEST_CASE("budget rounds up without overshooting exact products") {
    CHECK(mask_budget(0.15, 100) == 15);
    CHECK(mask_budget(0.15, 7) == 2);
    CHECK(mask_budget(0.15, 1) == 1);
    CHECK(mask_budget(0.5, 0) == 0);
  }

  TEST_CASE("policy validation and level names") {
    MaskingPolicy p;
    CHECK_NOTHROW(p.validate());
    p.p_keep = 0.2;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.mask_ratio = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    for (auto l : {MaskLevel::subword, MaskLevel::whole_word, MaskLevel::span})
      CHECK(parse_mask_level(to_string(l)) == l);
    CHECK_THROWS_AS(parse_mask_level("token"), ConfigError);
  }

  TEST_CASE("realized ratio is close to the target at every level") {
    for (auto level : {MaskLevel::subword, MaskLevel::whole_word, MaskLevel::span}) {
      Rng rng(100);
      MaskingPolicy policy;
      policy.level = level;
      std::size_t tokens = 0, masked = 0;
      while (tokens < 100000) {
        const auto seq = long_sequence(rng);
        const auto ex = apply_mlm_mask(seq, policy, rng, kVocab);
        REQUIRE(ex.has_value());
        tokens += maskable_count(seq);
        masked += ex->targets.size();
      }
      const double ratio = static_cast<double>(masked) / static_cast<double>(tokens);
      INFO(to_string(level), " ratio ", ratio);
      CHECK(std::abs(ratio - 0.15) <= 0.01);
    }
  }

  TEST_CASE("targets are ordinary tokens, recorded with their original ids") {
    Rng rng(101);
    for (auto level : {MaskLevel::subword, MaskLevel::whole_word, MaskLevel::span}) {
      MaskingPolicy policy;
      policy.level = level;
      for (int trial = 0; trial < 200; ++trial) {
        const auto seq = testing::random_sequence(rng, kVocab, 48, 6, 6);
        const auto ex = apply_mlm_mask(seq, policy, rng, kVocab);
        REQUIRE(ex.has_value());
        CHECK(ex->ids.size() == seq.valid_count());
        std::set<int> seen;
        for (const auto& t : ex->targets) {
          CHECK(seen.insert(t.position).second);
          CHECK_FALSE(data::is_special(seq.ids[t.position]));
          CHECK(t.id == seq.ids[t.position]);
        }
        // Untargeted positions are never altered.
        for (std::size_t i = 0; i < ex->ids.size(); ++i)
          if (!seen.count(static_cast<int>(i))) CHECK(ex->ids[i] == seq.ids[i]);
      }
    }
  }

  TEST_CASE("whole-word masking takes every piece of a chosen word") {
    Rng rng(102);
    MaskingPolicy policy;
    policy.level = MaskLevel::whole_word;
    for (int trial = 0; trial < 300; ++trial) {
      const auto seq = testing::random_sequence(rng, kVocab, 64, 6, 6);
      const auto ex = apply_mlm_mask(seq, policy, rng, kVocab);
      std::set<int> chosen;
      for (const auto& t : ex->targets) chosen.insert(t.position);
      for (int pos : chosen) {
        // Walk left to the word start and right to the end of the word.
        int b = pos;
        while (!seq.word_start[b] && !data::is_special(seq.ids[b - 1])) --b;
        int e = pos + 1;
        while (e < static_cast<int>(seq.length()) && seq.valid[e] && !seq.word_start[e] &&
               !data::is_special(seq.ids[e]))
          ++e;
        for (int i = b; i < e; ++i) CHECK(chosen.count(i) == 1);
      }
    }
  }

  TEST_CASE("span lengths follow the truncated geometric law") {
    Rng rng(103);
    for (std::size_t n = 1; n <= 10; n += 3) {
      CHECK(truncated_geometric_mean(0.2, n) == doctest::Approx(span_mean_oracle(0.2, n)).epsilon(1e-12));
    }
    for (int i = 0; i < 1000; ++i) CHECK(sample_span_length(0.2, 1, rng) == 1);
    double total = 0.0;
    const int draws = 200000;
    std::size_t longest = 0;
    for (int i = 0; i < draws; ++i) {
      const auto len = sample_span_length(0.2, 10, rng);
      longest = std::max(longest, len);
      total += static_cast<double>(len);
    }
    CHECK(longest == 10);
    const double oracle = span_mean_oracle(0.2, 10);
    CHECK(std::abs(total / draws - oracle) / oracle < 0.02);
  }

  TEST_CASE("single-token spans still fill the budget") {
    Rng rng(104);
    MaskingPolicy policy;
    policy.level = MaskLevel::span;
    policy.span_max_len = 1;
    const auto seq = long_sequence(rng);
    const auto ex = apply_mlm_mask(seq, policy, rng, kVocab);
    CHECK(ex->targets.size() == mask_budget(0.15, maskable_count(seq)));
  }

  TEST_CASE("replacement proportions") {
    Rng rng(105);
    MaskingPolicy policy;
    std::size_t total = 0, masked = 0, kept = 0, random = 0;
    while (total < 100000) {
      const auto seq = long_sequence(rng);
      const auto ex = apply_mlm_mask(seq, policy, rng, kVocab);
      for (const auto& t : ex->targets) {
        ++total;
        const int now = ex->ids[t.position];
        if (now == data::kMask) ++masked;
        else if (now == t.id) ++kept;
        else ++random;
        CHECK((!data::is_special(now) || now == data::kMask));
      }
    }
    const double n = static_cast<double>(total);
    // A random draw equal to the original counts as kept.
    const double same = 0.1 / (kVocab - data::kNumSpecials);
    CHECK(masked / n == doctest::Approx(0.8).epsilon(0.0125));
    CHECK(kept / n == doctest::Approx(0.1 + same).epsilon(0.06));
    CHECK(random / n == doctest::Approx(0.1 - same).epsilon(0.06));
  }

  TEST_CASE("a sequence of specials yields no example") {
    data::EncodedSequence seq;
    seq.ids = {data::kCls, data::kUnk, data::kSep};
    seq.utt_index = {0, 0, 0};
    seq.speaker = {0, 0, 0};
    seq.valid = {1, 1, 1};
    seq.word_start = {0, 0, 0};
    Rng rng(1);
    CHECK_FALSE(apply_mlm_mask(seq, MaskingPolicy{}, rng, kVocab).has_value());
  }
}

TEST_SUITE("next utterance prediction") {
  TEST_CASE("pairs per dialogue and their layout") {
    NegativePool pool({{20, 21}, {22}, {23, 24, 25}});
    Rng rng(200);
    const auto three = dialogue_of({{10, 11}, {12}, {13, 14}});
    const auto pairs = sample_nup_pairs(three, pool, rng, 64);
    REQUIRE(pairs.size() == 4);
    const std::vector<std::vector<int>> truth{{12}, {13, 14}};
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto& ex = pairs[i];
      CHECK(ex.kind == ExampleKind::nup);
      CHECK(ex.label == (i % 2 == 0 ? 1 : 0));
      CHECK(ex.ids.front() == data::kCls);
      CHECK(ex.ids.back() == data::kSep);
      // ... [SEP] candidate [SEP]
      const auto& cand = truth[i / 2];
      std::vector<int> tail(ex.ids.end() - static_cast<std::ptrdiff_t>(cand.size()) - 1, ex.ids.end() - 1);
      if (ex.label == 1) {
        CHECK(tail == cand);
        CHECK(ex.ids[ex.ids.size() - cand.size() - 2] == data::kSep);
      } else {
        CHECK(tail != cand);
      }
    }
    CHECK(sample_nup_pairs(dialogue_of({{10, 11}}), pool, rng, 64).empty());
  }

  TEST_CASE("negatives always differ from the truth") {
    // The pool contains the true next utterance; it must be resampled.
    NegativePool pool({{12}, {30}});
    Rng rng(201);
    const auto d = dialogue_of({{10}, {12}});
    for (int i = 0; i < 100; ++i) {
      const auto pairs = sample_nup_pairs(d, pool, rng, 16);
      REQUIRE(pairs.size() == 2);
      CHECK(pairs[1].ids[pairs[1].ids.size() - 2] == 30);
    }
    CHECK_THROWS_AS(NegativePool({{1, 2}, {1, 2}}), ConfigError);
    CHECK_THROWS_AS(NegativePool({}), ConfigError);
  }

  TEST_CASE("stream balance and determinism") {
    Rng rng(202);
    std::vector<data::DialogueExample> corpus;
    for (int i = 0; i < 50; ++i) corpus.push_back(testing::random_dialogue(rng, kVocab, 6, 5));
    MaskingPolicy policy;
    policy.seed = 9;
    const auto a = build_posttrain_stream(corpus, policy, kVocab, 96);
    const auto b = build_posttrain_stream(corpus, policy, kVocab, 96);
    CHECK(a == b);
    std::size_t pos = 0, neg = 0, mlm = 0;
    for (const auto& ex : a) {
      if (ex.kind == ExampleKind::mlm) ++mlm;
      else (ex.label ? pos : neg) += 1;
    }
    CHECK(mlm == corpus.size());
    CHECK(pos == neg);
    CHECK(pos > 0);
    std::stringstream sa, sb;
    write_records(sa, a);
    write_records(sb, b);
    CHECK(sa.str() == sb.str());
    policy.seed = 10;
    CHECK(build_posttrain_stream(corpus, policy, kVocab, 96) != a);
  }
}

TEST_SUITE("post-training losses") {
  TEST_CASE("uniform predictions give ln V and ln 2") {
    const std::size_t V = 7;
    auto logits = nn::Tensor<double>::zeros({3, V});
    const std::vector<int> ids{1, 4, 6};
    CHECK(mlm_loss(logits, ids).item() == doctest::Approx(std::log(7.0)));
    CHECK(nup_loss(nn::Tensor<double>::scalar(0.5), 1).item() == doctest::Approx(std::log(2.0)));
    CHECK(nup_loss(nn::Tensor<double>::scalar(0.5), 0).item() == doctest::Approx(std::log(2.0)));
    CHECK(combined_loss(nn::Tensor<double>::scalar(1.0), nn::Tensor<double>::scalar(2.0)).item() == 3.0);
    auto empty = nn::Tensor<double>::zeros({0, V});
    CHECK(mlm_loss(empty, std::vector<int>{}).item() == 0.0);
  }

  TEST_CASE("batch objective combines the two means") {
    model::ModelConfig c;
    c.vocab_size = kVocab;
    c.d = 8;
    c.max_len = 32;
    model::CdnModel<double> m(c, 3);
    PosttrainExample mlm{ExampleKind::mlm, {data::kCls, 10, data::kMask, data::kSep}, {{2, 11}}, 0};
    PosttrainExample nup{ExampleKind::nup, {data::kCls, 10, data::kSep, 12, data::kSep}, {}, 1};
    const std::vector<const PosttrainExample*> batch{&mlm, &nup};
    const auto loss = posttrain_loss(m, batch);
    CHECK(loss.total.item() == doctest::Approx(loss.mlm.item() + loss.nup.item()));
    const std::vector<const PosttrainExample*> only_nup{&nup};
    const auto n = posttrain_loss(m, only_nup);
    CHECK(n.mlm.item() == 0.0);
    CHECK(n.nup.item() == doctest::Approx(loss.nup.item()));
  }
}

TEST_SUITE("records") {
  TEST_CASE("round trip and damaged input") {
    std::vector<PosttrainExample> ex{
        {ExampleKind::mlm, {2, 9, 4, 3}, {{2, 17}}, 0},
        {ExampleKind::nup, {2, 9, 3, 8, 3}, {}, 1},
        {ExampleKind::nup, {2, 9, 3, 7, 3}, {}, 0},
    };
    std::stringstream io;
    write_records(io, ex);
    const auto bytes = io.str();
    CHECK(read_records(io) == ex);

    std::istringstream cut(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_records(cut), FormatError);
    auto bad_kind = bytes;
    bad_kind[0] = 7;
    std::istringstream k(bad_kind);
    CHECK_THROWS_AS(read_records(k), FormatError);
    std::istringstream empty("");
    CHECK(read_records(empty).empty());
  }
}
