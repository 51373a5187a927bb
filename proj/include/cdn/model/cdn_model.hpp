#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cdn/data/encoding.hpp"
#include "cdn/masks/channel_masks.hpp"
#include "cdn/model/config.hpp"
#include "cdn/model/layers.hpp"

namespace cdn::model {

/// Intermediate values of one forward pass, for inspection and tests.
template <typename T>
struct ForwardTrace {
  Tensor<T> E;                    // encoder output [l x d]
  std::array<Tensor<T>, 4> C;     // channel outputs of the last decoupling block
  Tensor<T> P1, P2;               // gate ratios (undefined for gateless variants)
  Tensor<T> Cu, Cs;               // fused channel representations [l x d]
  Tensor<T> Lu, Ls;               // utterance representations [n_utts x d]
  Tensor<T> Hu, Hs;               // top BiGRU layer states [n_utts x 2d]
  Tensor<T> v1, v2;               // channel dialogue vectors
  Tensor<T> v;                    // fused dialogue vector [1 x d]
  Tensor<T> logit;                // [1 x 1]
};

template <typename T>
struct EncoderLayer {
  MaskedMhsa<T> attn;
  LayerNormParams<T> ln1;
  Linear<T> ff1, ff2;
  LayerNormParams<T> ln2;
};

template <typename T>
struct GateParams {
  Linear<T> fc_a, fc_b;  // heuristic projections (absent for no_original_no_gate)
  Linear<T> fc_out;      // ratio FC, or the plain fusion FC for gateless variants
};

/// Channel-aware decoupling network over a toy transformer encoder.
///
/// Precision is a template parameter: float for training, double for the
/// finite-difference suites. Parameter handles are resolved once at
/// construction; the ParamStore owns the same tensors.
template <typename T>
class CdnModel {
 public:
  CdnModel(const ModelConfig& config, std::uint64_t seed);

  CdnModel(const CdnModel&) = delete;
  CdnModel& operator=(const CdnModel&) = delete;

  const ModelConfig& config() const { return config_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  // Dropout is only active in training mode (and only when config.dropout > 0).
  void set_training(bool on) { training_ = on; }

  /// Contextual token representations E [l x d]; pad rows are zero.
  Tensor<T> encode(std::span<const int> ids, std::span<const std::uint8_t> valid);
  Tensor<T> encode(const data::EncodedSequence& seq) { return encode(seq.ids, seq.valid); }

  /// One decoupling block. inputs[k] feeds channel k (the encoder output for
  /// the first block, the same channel's previous output afterwards).
  std::array<Tensor<T>, 4> decouple_block(const std::array<Tensor<T>, 4>& inputs,
                                          const masks::ChannelMaskSet& masks,
                                          std::size_t block) const;

  /// All blocks chained per channel.
  std::array<Tensor<T>, 4> decouple(const Tensor<T>& E, const masks::ChannelMaskSet& masks) const;

  /// Gate `gate` (0 = utterance channel, 1 = speaker channel). Returns the
  /// fused representation and the ratio P (undefined for gateless variants).
  std::pair<Tensor<T>, Tensor<T>> gate_fuse(const Tensor<T>& E, const Tensor<T>& Ca,
                                            const Tensor<T>& Cb, std::size_t gate) const;

  /// Pools token rows into one row per utterance.
  Tensor<T> aggregate(const Tensor<T>& C, const data::EncodedSequence& seq) const;

  /// Channel dialogue vector from utterance rows L [n x d]:
  /// [final forward state ; final backward state] of the top BiGRU layer, or
  /// a pooled row for the pooling integrations. `top_states` receives the
  /// top layer's per-step states when non-null.
  Tensor<T> integrate(const Tensor<T>& L, std::size_t channel, Tensor<T>* top_states = nullptr) const;

  /// tanh(W [v1; v2] + b) followed by the classifier FC; returns the logit.
  Tensor<T> fuse_and_score(const Tensor<T>& v1, const Tensor<T>& v2, Tensor<T>* v_out = nullptr) const;

  /// Full pass: matching logit [1 x 1] for one encoded context/candidate.
  Tensor<T> forward_logit(const data::EncodedSequence& seq, ForwardTrace<T>* trace = nullptr);

  /// Pointwise matching score g(c, r) = sigmoid(logit).
  Tensor<T> score(const data::EncodedSequence& seq) { return nn::sigmoid(forward_logit(seq)); }

  /// Mean binary cross-entropy over pointwise examples.
  Tensor<T> pointwise_loss(std::span<const data::EncodedSequence* const> seqs,
                           std::span<const int> labels);

  /// Mean categorical cross-entropy; each example is its candidates' encodings.
  Tensor<T> multichoice_loss(const std::vector<std::vector<const data::EncodedSequence*>>& examples,
                             std::span<const int> gold);

  /// Candidate logits of one multichoice example, as [1 x C].
  Tensor<T> candidate_logits(const std::vector<const data::EncodedSequence*>& candidates);

  // Post-training heads on the encoder output.
  /// Token logits [n x V] at the given positions, with the output projection
  /// tied to the token embedding.
  Tensor<T> mlm_logits(const Tensor<T>& E, std::span<const int> positions) const;
  /// Probability that the [CLS] row marks a genuine next utterance, [1 x 1].
  Tensor<T> nup_probability(const Tensor<T>& E) const;

 private:
  void build(std::uint64_t seed);

  ModelConfig config_;
  ParamStore<T> params_;
  bool training_ = false;
  Rng dropout_rng_;

  Tensor<T> tok_emb_, pos_emb_;
  LayerNormParams<T> emb_ln_;
  std::vector<EncoderLayer<T>> encoder_;
  // decoupling_[block][channel]
  std::vector<std::array<MaskedMhsa<T>, 4>> decoupling_;
  std::vector<std::array<LayerNormParams<T>, 4>> decoupling_ln_;
  std::array<GateParams<T>, 2> gates_;
  std::array<std::vector<BiGruLayer<T>>, 2> grus_;
  Tensor<T> fusion_w_;  // [d x 2 * channel_dim]
  Tensor<T> fusion_b_;
  Linear<T> classifier_;
  Tensor<T> mlm_bias_;
  Linear<T> nup_head_;
};

}  // namespace cdn::model
