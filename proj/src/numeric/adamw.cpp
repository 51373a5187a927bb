#include "cdn/numeric/adamw.hpp"

#include <cmath>

#include "cdn/error.hpp"

namespace cdn::nn {

template <typename T>
void adamw_step(ParamStore<T>& store, AdamWState<T>& state, double lr) {
  for (const auto& [path, p] : store) {
    if (!p.has_grad()) throw ContractError("adamw_step: parameter " + path + " has no gradient");
  }
  state.step += 1;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(h.beta1, t);
  const double bias2 = 1.0 - std::pow(h.beta2, t);
  for (auto& [path, p] : store) {
    auto& m = state.m[path];
    auto& v = state.v[path];
    if (m.size() != p.size()) {
      m.assign(p.size(), T(0));
      v.assign(p.size(), T(0));
    }
    auto w = p.mutable_data();
    auto g = p.mutable_grad();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      double wi = w[i];
      wi -= lr * h.weight_decay * wi;
      const double mi = h.beta1 * m[i] + (1.0 - h.beta1) * gi;
      const double vi = h.beta2 * v[i] + (1.0 - h.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      wi -= lr * (mi / bias1) / (std::sqrt(vi / bias2) + h.eps);
      w[i] = static_cast<T>(wi);
      g[i] = T(0);
    }
  }
}

template void adamw_step(ParamStore<float>&, AdamWState<float>&, double);
template void adamw_step(ParamStore<double>&, AdamWState<double>&, double);

}  // namespace cdn::nn
