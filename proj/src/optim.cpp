#include "roomsense/optim.hpp"

#include <cmath>
#include <numbers>

#include "roomsense/error.hpp"

namespace roomsense {

void adam_step(ParamStore& store, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  for (const auto& b : store.buffers()) {
    if (!b.trainable || b.state) continue;
    for (double g : b.grad)
      if (!std::isfinite(g)) throw DivergenceError("non-finite gradient in buffer '" + b.name + "'");
  }
  state.m.resize(store.size());
  state.v.resize(store.size());
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& b = store[i];
    if (!b.trainable || b.state) continue;
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != b.size()) m.assign(b.size(), 0.0), v.assign(b.size(), 0.0);
    for (std::size_t k = 0; k < b.size(); ++k) {
      const double g = b.grad[k];
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g;
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g * g;
      b.value[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + state.eps);
    }
  }
  store.zero_grad();
}

double cosine_lr(std::uint64_t step, std::uint64_t total, double lr_max, double lr_min) {
  if (total < 1) throw ConfigError("cosine schedule needs total >= 1");
  if (step > total) step = total;
  const double frac = static_cast<double>(step) / static_cast<double>(total);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace roomsense
