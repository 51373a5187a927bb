#include "cdn/masks/channel_masks.hpp"

#include <algorithm>

namespace cdn::masks {

std::size_t BoolMatrix::count_row(std::size_t i) const {
  return static_cast<std::size_t>(
      std::count(cells.begin() + i * cols, cells.begin() + (i + 1) * cols, 1));
}

ChannelMaskSet build_masks(const data::EncodedSequence& seq) {
  const std::size_t l = seq.length();
  ChannelMaskSet set;
  for (auto& m : set.allowed) m = BoolMatrix(l, l);
  for (std::size_t i = 0; i < l; ++i) {
    if (!seq.valid[i]) continue;
    for (std::size_t j = 0; j < l; ++j) {
      if (!seq.valid[j]) continue;
      const bool same_utt = seq.utt_index[i] == seq.utt_index[j];
      const bool same_spk = seq.speaker[i] == seq.speaker[j];
      set.allowed[0].set(i, j, same_utt);
      set.allowed[1].set(i, j, !same_utt);
      set.allowed[2].set(i, j, same_spk);
      set.allowed[3].set(i, j, !same_spk);
    }
  }
  return set;
}

BoolMatrix padding_mask(const data::EncodedSequence& seq) {
  const std::size_t l = seq.length();
  BoolMatrix m(l, l);
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < l; ++j) m.set(i, j, seq.valid[i] && seq.valid[j]);
  return m;
}

std::vector<double> additive_form(const BoolMatrix& mask) {
  std::vector<double> out(mask.cells.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = mask.cells[k] ? 0.0 : kMaskedLogit;
  return out;
}

std::string render(const BoolMatrix& mask) {
  std::string out;
  out.reserve(mask.rows * (mask.cols + 1));
  for (std::size_t i = 0; i < mask.rows; ++i) {
    for (std::size_t j = 0; j < mask.cols; ++j) out += mask(i, j) ? '1' : '0';
    out += '\n';
  }
  return out;
}

}  // namespace cdn::masks
