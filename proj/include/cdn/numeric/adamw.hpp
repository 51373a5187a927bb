#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cdn/numeric/param_store.hpp"

namespace cdn::nn {

struct AdamWHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW moments and step counter for one ParamStore.
template <typename T>
struct AdamWState {
  AdamWHyper hyper;
  std::int64_t step = 0;
  std::unordered_map<std::string, std::vector<T>> m;
  std::unordered_map<std::string, std::vector<T>> v;

  explicit AdamWState(AdamWHyper h = {}) : hyper(h) {}
};

/// One AdamW update (decoupled weight decay, bias-corrected moments) on every
/// parameter in the store, using `lr` in place of hyper.lr when it is given
/// (schedules pass the current rate). Grads are zeroed afterwards.
/// Throws ContractError if a parameter has no grad buffer.
template <typename T>
void adamw_step(ParamStore<T>& store, AdamWState<T>& state, double lr);

template <typename T>
void adamw_step(ParamStore<T>& store, AdamWState<T>& state) {
  adamw_step(store, state, state.hyper.lr);
}

}  // namespace cdn::nn
