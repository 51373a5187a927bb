#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cdn/data/encoding.hpp"

namespace cdn::masks {

// Stand-in for -infinity in additive masks.
inline constexpr double kMaskedLogit = -1e9;

struct BoolMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> cells;

  BoolMatrix() = default;
  BoolMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), cells(r * c, 0) {}

  bool operator()(std::size_t i, std::size_t j) const { return cells[i * cols + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v) { cells[i * cols + j] = v ? 1 : 0; }
  std::size_t count_row(std::size_t i) const;
};

enum class Channel : std::size_t {
  same_utterance = 0,   // M1
  other_utterance = 1,  // M2
  same_speaker = 2,     // M3
  other_speaker = 3,    // M4
};

/// The four attention masks of one sequence. allowed[k](i, j) says whether
/// query i may attend to key j in channel k; any pair touching padding is
/// disallowed in every channel.
struct ChannelMaskSet {
  std::array<BoolMatrix, 4> allowed;

  const BoolMatrix& operator[](Channel c) const { return allowed[static_cast<std::size_t>(c)]; }
  std::size_t length() const { return allowed[0].rows; }
};

ChannelMaskSet build_masks(const data::EncodedSequence& seq);

/// Full valid-pair mask (plain self-attention over non-pad tokens).
BoolMatrix padding_mask(const data::EncodedSequence& seq);

/// 0 where allowed, kMaskedLogit where not.
std::vector<double> additive_form(const BoolMatrix& mask);

/// Rows of '0'/'1' characters, one line per query position.
std::string render(const BoolMatrix& mask);

}  // namespace cdn::masks
