#include "cdn/model/layers.hpp"

#include <cmath>

namespace cdn::model {

using namespace cdn::nn;

template <typename T>
Tensor<T> ParamBuilder<T>::weight(const std::string& path, std::size_t fan_in,
                                  std::size_t fan_out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<T> values(fan_in * fan_out);
  for (auto& v : values) v = static_cast<T>(rng_.uniform(-bound, bound));
  return store_.add(path, {fan_in, fan_out}, std::move(values));
}

template <typename T>
Tensor<T> ParamBuilder<T>::bias(const std::string& path, std::size_t n) {
  return store_.add(path, {n}, std::vector<T>(n, T(0)));
}

template <typename T>
Tensor<T> ParamBuilder<T>::ones(const std::string& path, std::size_t n) {
  return store_.add(path, {n}, std::vector<T>(n, T(1)));
}

template <typename T>
Tensor<T> ParamBuilder<T>::embedding(const std::string& path, std::size_t rows, std::size_t d) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<T> values(rows * d);
  for (auto& v : values) v = static_cast<T>(rng_.uniform(-bound, bound));
  return store_.add(path, {rows, d}, std::move(values));
}

template <typename T>
Linear<T> Linear<T>::make(ParamBuilder<T>& pb, const std::string& prefix, std::size_t in,
                          std::size_t out, bool with_bias) {
  Linear l;
  l.w = pb.weight(prefix + ".w", in, out);
  if (with_bias) l.b = pb.bias(prefix + ".b", out);
  return l;
}

template <typename T>
Tensor<T> Linear<T>::operator()(const Tensor<T>& x) const {
  auto y = matmul(x, w);
  return b.defined() ? add(y, b) : y;
}

template <typename T>
LayerNormParams<T> LayerNormParams<T>::make(ParamBuilder<T>& pb, const std::string& prefix,
                                            std::size_t d) {
  return {pb.ones(prefix + ".gain", d), pb.bias(prefix + ".bias", d)};
}

template <typename T>
MaskedMhsa<T> MaskedMhsa<T>::make(ParamBuilder<T>& pb, const std::string& prefix, std::size_t d,
                                  std::size_t heads) {
  MaskedMhsa m;
  const std::size_t dk = d / heads;
  for (std::size_t h = 0; h < heads; ++h) {
    const std::string p = prefix + ".head" + std::to_string(h);
    m.wq.push_back(pb.weight(p + ".wq", d, dk));
    m.wk.push_back(pb.weight(p + ".wk", d, dk));
    m.wv.push_back(pb.weight(p + ".wv", d, dk));
  }
  m.wo = pb.weight(prefix + ".wo", d, d);
  return m;
}

template <typename T>
Tensor<T> MaskedMhsa<T>::operator()(const Tensor<T>& x, std::span<const std::uint8_t> allowed) const {
  const T scale = T(1) / std::sqrt(static_cast<T>(wq[0].dim(1)));
  std::vector<Tensor<T>> heads;
  heads.reserve(wq.size());
  for (std::size_t h = 0; h < wq.size(); ++h) {
    auto q = matmul(x, wq[h]);
    auto k = matmul(x, wk[h]);
    auto v = matmul(x, wv[h]);
    auto scores = affine(matmul(q, transpose(k)), scale, T(0));
    heads.push_back(matmul(masked_softmax(scores, allowed), v));
  }
  return matmul(heads.size() == 1 ? heads[0] : concat_last(heads), wo);
}

template <typename T>
GruDirection<T> GruDirection<T>::make(ParamBuilder<T>& pb, const std::string& prefix,
                                      std::size_t in, std::size_t d) {
  GruDirection g;
  g.w_xr = pb.weight(prefix + ".w_xr", in, d);
  g.w_xz = pb.weight(prefix + ".w_xz", in, d);
  g.w_xn = pb.weight(prefix + ".w_xn", in, d);
  g.w_hr = pb.weight(prefix + ".w_hr", d, d);
  g.w_hz = pb.weight(prefix + ".w_hz", d, d);
  g.w_hn = pb.weight(prefix + ".w_hn", d, d);
  g.b_r = pb.bias(prefix + ".b_r", d);
  g.b_z = pb.bias(prefix + ".b_z", d);
  g.b_xn = pb.bias(prefix + ".b_xn", d);
  g.b_hn = pb.bias(prefix + ".b_hn", d);
  return g;
}

template <typename T>
std::vector<Tensor<T>> GruDirection<T>::run(const Tensor<T>& x, bool reverse) const {
  const std::size_t n = x.dim(0);
  const std::size_t d = w_hr.dim(0);
  const auto xr = add(matmul(x, w_xr), b_r);
  const auto xz = add(matmul(x, w_xz), b_z);
  const auto xn = add(matmul(x, w_xn), b_xn);
  std::vector<Tensor<T>> states(n);
  auto h = Tensor<T>::zeros({1, d});
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    auto r = sigmoid(add(slice_rows(xr, t, 1), matmul(h, w_hr)));
    auto z = sigmoid(add(slice_rows(xz, t, 1), matmul(h, w_hz)));
    auto cand = tanh(add(slice_rows(xn, t, 1), mul(r, add(matmul(h, w_hn), b_hn))));
    h = add(mul(affine(z, T(-1), T(1)), cand), mul(z, h));
    states[t] = h;
  }
  return states;
}

template class ParamBuilder<float>;
template class ParamBuilder<double>;
template struct Linear<float>;
template struct Linear<double>;
template struct LayerNormParams<float>;
template struct LayerNormParams<double>;
template struct MaskedMhsa<float>;
template struct MaskedMhsa<double>;
template struct GruDirection<float>;
template struct GruDirection<double>;

}  // namespace cdn::model
