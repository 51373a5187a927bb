#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdn/numeric/ops.hpp"
#include "cdn/numeric/param_store.hpp"
#include "cdn/rng.hpp"

namespace cdn::model {

using nn::ParamStore;
using nn::Tensor;

/// Registers parameters in a store and initializes them: weights uniform in
/// +-1/sqrt(fan_in), biases zero, layer-norm gains one.
template <typename T>
class ParamBuilder {
 public:
  ParamBuilder(ParamStore<T>& store, Rng& rng) : store_(store), rng_(rng) {}

  Tensor<T> weight(const std::string& path, std::size_t fan_in, std::size_t fan_out);
  Tensor<T> bias(const std::string& path, std::size_t n);
  Tensor<T> ones(const std::string& path, std::size_t n);
  Tensor<T> embedding(const std::string& path, std::size_t rows, std::size_t d);

 private:
  ParamStore<T>& store_;
  Rng& rng_;
};

template <typename T>
struct Linear {
  Tensor<T> w;  // [in x out]
  Tensor<T> b;  // [out]; may be undefined

  static Linear make(ParamBuilder<T>& pb, const std::string& prefix, std::size_t in,
                     std::size_t out, bool with_bias = true);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

template <typename T>
struct LayerNormParams {
  Tensor<T> gain;
  Tensor<T> bias;

  static LayerNormParams make(ParamBuilder<T>& pb, const std::string& prefix, std::size_t d);
  Tensor<T> operator()(const Tensor<T>& x) const { return nn::layer_norm(x, gain, bias); }
};

/// Multi-head self-attention with a boolean mask:
/// Concat(head_1..head_h) W^O, head_i = softmax(Q_i K_i^T / sqrt(d_k) + M) V_i.
/// No biases; each head has its own [d x d/h] projections.
template <typename T>
struct MaskedMhsa {
  std::vector<Tensor<T>> wq, wk, wv;
  Tensor<T> wo;  // [d x d]

  static MaskedMhsa make(ParamBuilder<T>& pb, const std::string& prefix, std::size_t d,
                         std::size_t heads);
  Tensor<T> operator()(const Tensor<T>& x, std::span<const std::uint8_t> allowed) const;
};

/// One direction of a GRU:
///   r = sigmoid(x W_xr + h W_hr + b_r)
///   z = sigmoid(x W_xz + h W_hz + b_z)
///   n = tanh(x W_xn + b_xn + r * (h W_hn + b_hn))
///   h' = (1 - z) * n + z * h
template <typename T>
struct GruDirection {
  Tensor<T> w_xr, w_xz, w_xn;  // [in x d]
  Tensor<T> w_hr, w_hz, w_hn;  // [d x d]
  Tensor<T> b_r, b_z, b_xn, b_hn;

  static GruDirection make(ParamBuilder<T>& pb, const std::string& prefix, std::size_t in,
                           std::size_t d);
  /// Runs over rows of x [n x in] in order (or reversed) from a zero state.
  /// Returns the state after each row, indexed by row.
  std::vector<Tensor<T>> run(const Tensor<T>& x, bool reverse) const;
};

template <typename T>
struct BiGruLayer {
  GruDirection<T> fwd, bwd;
};

}  // namespace cdn::model
