#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "cdn/numeric/tensor.hpp"

namespace cdn::nn {

/// Named trainable parameters, iterated in lexicographic path order.
template <typename T>
class ParamStore {
 public:
  /// Registers a parameter; its grad buffer is allocated up front.
  /// Throws ContractError on duplicate paths.
  Tensor<T>& add(const std::string& path, Shape shape, std::vector<T> values);
  Tensor<T>& add(const std::string& path, Tensor<T> tensor);

  const Tensor<T>& get(const std::string& path) const;
  Tensor<T>& get(const std::string& path);
  bool contains(const std::string& path) const { return params_.count(path) != 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::vector<std::string> paths() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  double grad_norm() const;
  // Rescales all grads so the global L2 norm is at most max_norm.
  // Returns the norm before clipping.
  double clip_grad_norm(double max_norm);

  // Value snapshots, used for best-checkpoint selection.
  std::vector<std::vector<T>> snapshot() const;
  void restore(const std::vector<std::vector<T>>& values);

 private:
  std::map<std::string, Tensor<T>> params_;
};

}  // namespace cdn::nn
