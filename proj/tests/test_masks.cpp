#include <doctest.h>

#include <algorithm>

#include "cdn/masks/channel_masks.hpp"
#include "support/laws.hpp"
#include "support/random_data.hpp"

using namespace cdn;
using namespace cdn::masks;

namespace {

data::EncodedSequence layout(std::vector<int> t, std::vector<int> s, std::size_t valid) {
  data::EncodedSequence seq;
  seq.utt_index = std::move(t);
  seq.speaker = std::move(s);
  const auto l = seq.utt_index.size();
  seq.ids.assign(l, data::kUnk);
  seq.valid.assign(l, 0);
  std::fill_n(seq.valid.begin(), valid, 1);
  seq.word_start.assign(l, 0);
  seq.n_utts = *std::max_element(seq.utt_index.begin(), seq.utt_index.end()) + 1;
  return seq;
}

std::vector<std::size_t> allowed_cols(const BoolMatrix& m, std::size_t row) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < m.cols; ++j)
    if (m(row, j)) out.push_back(j);
  return out;
}

using Cols = std::vector<std::size_t>;

}  // namespace

TEST_SUITE("channel masks") {
  TEST_CASE("seven-token example") {
    const auto seq = layout({0, 0, 0, 1, 1, 2, 2}, {0, 0, 0, 1, 1, 0, 0}, 7);
    const auto m = build_masks(seq);
    CHECK(allowed_cols(m[Channel::same_utterance], 3) == Cols{3, 4});
    CHECK(allowed_cols(m[Channel::other_utterance], 3) == Cols{0, 1, 2, 5, 6});
    CHECK(allowed_cols(m[Channel::same_speaker], 0) == Cols{0, 1, 2, 5, 6});
    CHECK(allowed_cols(m[Channel::other_speaker], 0) == Cols{3, 4});
    CHECK(render(m[Channel::same_utterance]) ==
          "1110000\n1110000\n1110000\n0001100\n0001100\n0000011\n0000011\n");
    CHECK(testing::mask_law_violation(seq, m).empty());
  }

  TEST_CASE("single utterance leaves the other-utterance channel empty") {
    const auto seq = layout({0, 0, 0}, {0, 0, 0}, 3);
    const auto m = build_masks(seq);
    for (std::size_t i = 0; i < 3; ++i) CHECK(m[Channel::other_utterance].count_row(i) == 0);
  }

  TEST_CASE("padding is excluded as query and key") {
    const auto seq = layout({0, 0, 1, 1, 0}, {0, 0, 1, 1, 0}, 4);
    const auto m = build_masks(seq);
    for (const auto& a : m.allowed) {
      CHECK(a.count_row(4) == 0);
      for (std::size_t i = 0; i < 5; ++i) CHECK_FALSE(a(i, 4));
    }
    const auto pad = padding_mask(seq);
    CHECK(pad.count_row(0) == 4);
    CHECK(pad.count_row(4) == 0);
  }

  TEST_CASE("additive form") {
    BoolMatrix m(1, 2);
    m.set(0, 0, true);
    const auto a = additive_form(m);
    CHECK(a[0] == 0.0);
    CHECK(a[1] == kMaskedLogit);
    BoolMatrix none(2, 2);
    for (double x : additive_form(none)) CHECK(x == -1e9);
  }

  TEST_CASE("laws hold on random encoded sequences") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
      const auto seq = testing::random_sequence(rng, 40, 8 + rng.index(40));
      const auto violation = testing::mask_law_violation(seq, build_masks(seq));
      CHECK_MESSAGE(violation.empty(), violation);
    }
  }

  TEST_CASE("permuting tokens within an utterance permutes mask rows and columns") {
    Rng rng(32);
    for (int trial = 0; trial < 50; ++trial) {
      auto seq = testing::random_sequence(rng, 40, 40);
      // Reverse the interior of the response segment (its tokens before [SEP]).
      const auto n = seq.valid_count();
      std::size_t begin = n - 1;
      while (begin > 0 && seq.utt_index[begin - 1] == seq.n_utts - 1) --begin;
      std::vector<std::size_t> perm(seq.length());
      for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
      std::reverse(perm.begin() + static_cast<std::ptrdiff_t>(begin),
                   perm.begin() + static_cast<std::ptrdiff_t>(n - 1));
      auto moved = seq;
      for (std::size_t i = 0; i < perm.size(); ++i) {
        moved.ids[i] = seq.ids[perm[i]];
        moved.utt_index[i] = seq.utt_index[perm[i]];
        moved.speaker[i] = seq.speaker[perm[i]];
      }
      const auto a = build_masks(seq);
      const auto b = build_masks(moved);
      for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t i = 0; i < seq.length(); ++i)
          for (std::size_t j = 0; j < seq.length(); ++j)
            CHECK(b.allowed[k](i, j) == a.allowed[k](perm[i], perm[j]));
    }
  }
}
