#include "cdn/numeric/param_store.hpp"

#include <cmath>

#include "cdn/error.hpp"

namespace cdn::nn {

template <typename T>
Tensor<T>& ParamStore<T>::add(const std::string& path, Shape shape, std::vector<T> values) {
  return add(path, Tensor<T>(std::move(shape), std::move(values), true));
}

template <typename T>
Tensor<T>& ParamStore<T>::add(const std::string& path, Tensor<T> tensor) {
  if (!tensor.requires_grad()) throw ContractError("parameter " + path + " must require grad");
  auto [it, inserted] = params_.emplace(path, std::move(tensor));
  if (!inserted) throw ContractError("duplicate parameter path " + path);
  return it->second;
}

template <typename T>
const Tensor<T>& ParamStore<T>::get(const std::string& path) const {
  auto it = params_.find(path);
  if (it == params_.end()) throw ContractError("unknown parameter " + path);
  return it->second;
}

template <typename T>
Tensor<T>& ParamStore<T>::get(const std::string& path) {
  auto it = params_.find(path);
  if (it == params_.end()) throw ContractError("unknown parameter " + path);
  return it->second;
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

template <typename T>
std::vector<std::string> ParamStore<T>::paths() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [path, _] : params_) out.push_back(path);
  return out;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

template <typename T>
double ParamStore<T>::grad_norm() const {
  double total = 0.0;
  for (const auto& [_, t] : params_)
    for (T g : t.grad()) total += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(total);
}

template <typename T>
double ParamStore<T>::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (max_norm > 0.0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / (norm + 1e-12));
    for (auto& [_, t] : params_)
      for (T& g : t.mutable_grad()) g *= scale;
  }
  return norm;
}

template <typename T>
std::vector<std::vector<T>> ParamStore<T>::snapshot() const {
  std::vector<std::vector<T>> out;
  out.reserve(params_.size());
  for (const auto& [_, t] : params_) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

template <typename T>
void ParamStore<T>::restore(const std::vector<std::vector<T>>& values) {
  if (values.size() != params_.size()) throw ContractError("snapshot size mismatch");
  std::size_t i = 0;
  for (auto& [path, t] : params_) {
    if (values[i].size() != t.size()) throw ContractError("snapshot shape mismatch at " + path);
    std::copy(values[i].begin(), values[i].end(), t.mutable_data().begin());
    ++i;
  }
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace cdn::nn
