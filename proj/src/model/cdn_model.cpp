#include "cdn/model/cdn_model.hpp"

#include <cmath>

#include "cdn/error.hpp"

namespace cdn::model {

using namespace cdn::nn;

namespace {

constexpr std::array<const char*, 4> kChannelNames = {"ch1", "ch2", "ch3", "ch4"};

bool channel_active(ChannelAblation ablation, std::size_t channel) {
  switch (ablation) {
    case ChannelAblation::both: return true;
    case ChannelAblation::utterance_only: return channel < 2;
    case ChannelAblation::speaker_only: return channel >= 2;
  }
  return true;
}

}  // namespace

template <typename T>
CdnModel<T>::CdnModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config), dropout_rng_(seed ^ 0xd1b54a32d192ed03ULL) {
  config_.validate();
  build(seed);
}

template <typename T>
void CdnModel<T>::build(std::uint64_t seed) {
  Rng rng(seed);
  ParamBuilder<T> pb(params_, rng);
  const std::size_t d = config_.d, h = config_.heads;

  tok_emb_ = pb.embedding("encoder.tok_emb", config_.vocab_size, d);
  pos_emb_ = pb.embedding("encoder.pos_emb", config_.max_len, d);
  emb_ln_ = LayerNormParams<T>::make(pb, "encoder.emb_ln", d);
  for (std::size_t i = 0; i < config_.encoder_layers; ++i) {
    const std::string p = "encoder.layer" + std::to_string(i);
    EncoderLayer<T> layer;
    layer.attn = MaskedMhsa<T>::make(pb, p + ".attn", d, h);
    layer.ln1 = LayerNormParams<T>::make(pb, p + ".ln1", d);
    layer.ff1 = Linear<T>::make(pb, p + ".ff1", d, config_.ffn_dim());
    layer.ff2 = Linear<T>::make(pb, p + ".ff2", config_.ffn_dim(), d);
    layer.ln2 = LayerNormParams<T>::make(pb, p + ".ln2", d);
    encoder_.push_back(std::move(layer));
  }

  for (std::size_t b = 0; b < config_.n_decoupling_blocks; ++b) {
    std::array<MaskedMhsa<T>, 4> block;
    std::array<LayerNormParams<T>, 4> norms;
    for (std::size_t k = 0; k < 4; ++k) {
      const std::string p = "decouple.block" + std::to_string(b) + "." + kChannelNames[k];
      block[k] = MaskedMhsa<T>::make(pb, p, d, h);
      if (config_.decoupling_residual) norms[k] = LayerNormParams<T>::make(pb, p + ".ln", d);
    }
    decoupling_.push_back(std::move(block));
    decoupling_ln_.push_back(std::move(norms));
  }

  for (std::size_t g = 0; g < 2; ++g) {
    const std::string p = "gate" + std::to_string(g + 1);
    auto& gate = gates_[g];
    switch (config_.gate_variant) {
      case GateVariant::full:
      case GateVariant::no_gate:
        gate.fc_a = Linear<T>::make(pb, p + ".fc_a", 4 * d, d);
        gate.fc_b = Linear<T>::make(pb, p + ".fc_b", 4 * d, d);
        break;
      case GateVariant::no_original_info:
        gate.fc_a = Linear<T>::make(pb, p + ".fc_a", d, d);
        gate.fc_b = Linear<T>::make(pb, p + ".fc_b", d, d);
        break;
      case GateVariant::no_original_no_gate: break;
    }
    gate.fc_out = Linear<T>::make(pb, p + ".fc_out", 2 * d, d);
  }

  if (config_.integration == Integration::bigru) {
    for (std::size_t c = 0; c < 2; ++c) {
      const std::string p = c == 0 ? "gru_u" : "gru_s";
      for (std::size_t layer = 0; layer < config_.n_bigru_layers; ++layer) {
        const std::size_t in = layer == 0 ? d : 2 * d;
        const std::string lp = p + ".layer" + std::to_string(layer);
        grus_[c].push_back({GruDirection<T>::make(pb, lp + ".fwd", in, d),
                            GruDirection<T>::make(pb, lp + ".bwd", in, d)});
      }
    }
  }

  const std::size_t fused_in = 2 * config_.channel_dim();
  fusion_w_ = pb.weight("fusion.w", fused_in, d);
  // Stored as W in R^{d x fused_in}; the builder draws [fan_in x fan_out].
  {
    auto src = fusion_w_.data();
    std::vector<T> t(src.size());
    for (std::size_t i = 0; i < fused_in; ++i)
      for (std::size_t j = 0; j < d; ++j) t[j * fused_in + i] = src[i * d + j];
    fusion_w_.node()->shape = {d, fused_in};
    std::copy(t.begin(), t.end(), fusion_w_.mutable_data().begin());
  }
  fusion_b_ = pb.bias("fusion.b", d);
  classifier_ = Linear<T>::make(pb, "classifier", d, 1);
  mlm_bias_ = pb.bias("mlm.bias", config_.vocab_size);
  nup_head_ = Linear<T>::make(pb, "nup", d, 1);
}

template <typename T>
Tensor<T> CdnModel<T>::encode(std::span<const int> ids, std::span<const std::uint8_t> valid) {
  const std::size_t l = ids.size();
  if (l > config_.max_len) {
    throw ContractError("sequence length " + std::to_string(l) + " exceeds max_len " +
                        std::to_string(config_.max_len));
  }
  if (valid.size() != l) throw DimensionError("encode: valid flags length mismatch");
  const double p = training_ ? config_.dropout : 0.0;

  Tensor<T> pos;
  if (config_.positions == PositionMode::absolute) {
    pos = slice_rows(pos_emb_, 0, l);
  } else {
    std::vector<int> offset(l);
    for (std::size_t i = 0, start = 0; i < l; ++i) {
      offset[i] = static_cast<int>(i - start);
      if (ids[i] == data::kSep) start = i + 1;
    }
    pos = gather_rows(pos_emb_, std::span<const int>(offset));
  }
  auto x = add(gather_rows(tok_emb_, ids), pos);
  x = dropout(emb_ln_(x), p, dropout_rng_);
  std::vector<std::uint8_t> allowed(l * l, 0);
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < l; ++j) allowed[i * l + j] = valid[i] && valid[j];
  for (const auto& layer : encoder_) {
    auto a = layer.attn(x, allowed);
    x = layer.ln1(add(x, dropout(a, p, dropout_rng_)));
    auto f = layer.ff2(relu(layer.ff1(x)));
    x = layer.ln2(add(x, dropout(f, p, dropout_rng_)));
  }
  return zero_rows(x, valid);
}

template <typename T>
std::array<Tensor<T>, 4> CdnModel<T>::decouple_block(const std::array<Tensor<T>, 4>& inputs,
                                                     const masks::ChannelMaskSet& masks,
                                                     std::size_t block) const {
  if (block >= decoupling_.size()) throw ContractError("decoupling block index out of range");
  std::array<Tensor<T>, 4> out;
  for (std::size_t k = 0; k < 4; ++k) {
    if (!channel_active(config_.channel_ablation, k)) continue;
    const auto& x = inputs[k];
    if (masks.allowed[k].rows != x.dim(0)) throw DimensionError("mask length != sequence length");
    auto c = decoupling_[block][k](x, masks.allowed[k].cells);
    if (config_.decoupling_residual) c = decoupling_ln_[block][k](add(x, c));
    out[k] = std::move(c);
  }
  return out;
}

template <typename T>
std::array<Tensor<T>, 4> CdnModel<T>::decouple(const Tensor<T>& E,
                                               const masks::ChannelMaskSet& masks) const {
  std::array<Tensor<T>, 4> state = {E, E, E, E};
  for (std::size_t b = 0; b < decoupling_.size(); ++b) state = decouple_block(state, masks, b);
  return state;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> CdnModel<T>::gate_fuse(const Tensor<T>& E, const Tensor<T>& Ca,
                                                       const Tensor<T>& Cb, std::size_t gate) const {
  const auto& g = gates_.at(gate);
  auto heuristics = [&E](const Tensor<T>& C) {
    return concat_last<T>({E, C, sub(E, C), mul(E, C)});
  };
  switch (config_.gate_variant) {
    case GateVariant::full:
    case GateVariant::no_original_info: {
      const bool with_e = config_.gate_variant == GateVariant::full;
      auto e1 = relu(g.fc_a(with_e ? heuristics(Ca) : Ca));
      auto e2 = relu(g.fc_b(with_e ? heuristics(Cb) : Cb));
      auto P = sigmoid(g.fc_out(concat_last<T>({e1, e2})));
      auto fused = add(mul(P, Ca), mul(affine(P, T(-1), T(1)), Cb));
      return {fused, P};
    }
    case GateVariant::no_gate: {
      auto e1 = relu(g.fc_a(heuristics(Ca)));
      auto e2 = relu(g.fc_b(heuristics(Cb)));
      return {g.fc_out(concat_last<T>({e1, e2})), Tensor<T>{}};
    }
    case GateVariant::no_original_no_gate:
      return {g.fc_out(concat_last<T>({Ca, Cb})), Tensor<T>{}};
  }
  throw ConfigError("unknown gate variant");
}

template <typename T>
Tensor<T> CdnModel<T>::aggregate(const Tensor<T>& C, const data::EncodedSequence& seq) const {
  const auto n = static_cast<std::size_t>(seq.n_utts);
  if (config_.aggregation == Aggregation::max) {
    return segment_max_pool(C, seq.utt_index, seq.valid, n);
  }
  return segment_mean_pool(C, seq.utt_index, seq.valid, n);
}

template <typename T>
Tensor<T> CdnModel<T>::integrate(const Tensor<T>& L, std::size_t channel,
                                 Tensor<T>* top_states) const {
  const std::size_t n = L.dim(0);
  if (config_.integration != Integration::bigru) {
    const std::vector<int> seg(n, 0);
    const std::vector<std::uint8_t> all(n, 1);
    auto pooled = config_.integration == Integration::max_pool
                      ? segment_max_pool(L, seg, all, 1)
                      : segment_mean_pool(L, seg, all, 1);
    if (top_states) *top_states = L;
    return pooled;
  }
  Tensor<T> x = L;
  Tensor<T> v;
  const auto& layers = grus_.at(channel);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto f = layers[i].fwd.run(x, false);
    auto b = layers[i].bwd.run(x, true);
    if (i + 1 < layers.size() || top_states) {
      x = concat_last<T>({concat_rows(f), concat_rows(b)});
    }
    if (i + 1 == layers.size()) {
      v = concat_last<T>({f[n - 1], b[0]});
      if (top_states) *top_states = x;
    }
  }
  return v;
}

template <typename T>
Tensor<T> CdnModel<T>::fuse_and_score(const Tensor<T>& v1, const Tensor<T>& v2,
                                      Tensor<T>* v_out) const {
  auto v = tanh(add(matmul(concat_last<T>({v1, v2}), transpose(fusion_w_)), fusion_b_));
  if (v_out) *v_out = v;
  return classifier_(v);
}

template <typename T>
Tensor<T> CdnModel<T>::forward_logit(const data::EncodedSequence& seq, ForwardTrace<T>* trace) {
  auto E = encode(seq);
  const auto masks = masks::build_masks(seq);
  const auto C = decouple(E, masks);

  std::array<Tensor<T>, 2> fused, ratio, pooled, states, vec;
  for (std::size_t c = 0; c < 2; ++c) {
    if (!channel_active(config_.channel_ablation, 2 * c)) continue;
    std::tie(fused[c], ratio[c]) = gate_fuse(E, C[2 * c], C[2 * c + 1], c);
    pooled[c] = aggregate(fused[c], seq);
    vec[c] = integrate(pooled[c], c, trace ? &states[c] : nullptr);
  }
  if (config_.channel_ablation == ChannelAblation::utterance_only) vec[1] = vec[0];
  if (config_.channel_ablation == ChannelAblation::speaker_only) vec[0] = vec[1];

  Tensor<T> v;
  auto logit = fuse_and_score(vec[0], vec[1], trace ? &v : nullptr);
  if (trace) {
    trace->E = E;
    trace->C = C;
    trace->P1 = ratio[0];
    trace->P2 = ratio[1];
    trace->Cu = fused[0];
    trace->Cs = fused[1];
    trace->Lu = pooled[0];
    trace->Ls = pooled[1];
    trace->Hu = states[0];
    trace->Hs = states[1];
    trace->v1 = vec[0];
    trace->v2 = vec[1];
    trace->v = v;
    trace->logit = logit;
  }
  return logit;
}

template <typename T>
Tensor<T> CdnModel<T>::pointwise_loss(std::span<const data::EncodedSequence* const> seqs,
                                      std::span<const int> labels) {
  if (seqs.size() != labels.size() || seqs.empty()) {
    throw ContractError("pointwise_loss: need one label per sequence");
  }
  std::vector<Tensor<T>> probs;
  probs.reserve(seqs.size());
  for (const auto* s : seqs) probs.push_back(score(*s));
  return cross_entropy_binary(concat_rows(probs), labels);
}

template <typename T>
Tensor<T> CdnModel<T>::candidate_logits(const std::vector<const data::EncodedSequence*>& candidates) {
  std::vector<Tensor<T>> logits;
  logits.reserve(candidates.size());
  for (const auto* s : candidates) logits.push_back(forward_logit(*s));
  return concat_last(logits);
}

template <typename T>
Tensor<T> CdnModel<T>::multichoice_loss(
    const std::vector<std::vector<const data::EncodedSequence*>>& examples,
    std::span<const int> gold) {
  if (examples.size() != gold.size() || examples.empty()) {
    throw ContractError("multichoice_loss: need one gold index per example");
  }
  std::vector<Tensor<T>> rows;
  bool uniform_width = true;
  for (const auto& ex : examples) {
    rows.push_back(candidate_logits(ex));
    uniform_width = uniform_width && rows.back().cols() == rows.front().cols();
  }
  if (uniform_width) return cross_entropy_categorical(concat_rows(rows), gold);
  Tensor<T> total;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto li = cross_entropy_categorical(rows[i], gold.subspan(i, 1));
    total = total.defined() ? add(total, li) : li;
  }
  return affine(total, T(1) / static_cast<T>(rows.size()), T(0));
}

template <typename T>
Tensor<T> CdnModel<T>::mlm_logits(const Tensor<T>& E, std::span<const int> positions) const {
  return add(matmul(gather_rows(E, positions), transpose(tok_emb_)), mlm_bias_);
}

template <typename T>
Tensor<T> CdnModel<T>::nup_probability(const Tensor<T>& E) const {
  return sigmoid(nup_head_(slice_rows(E, 0, 1)));
}

template class CdnModel<float>;
template class CdnModel<double>;

}  // namespace cdn::model
