#pragma once

#include <cstdint>
#include <vector>

#include "roomsense/params.hpp"

namespace roomsense {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;  // one per buffer, empty for frozen/state buffers
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update of every trainable buffer, then zeroes
/// all gradients. Frozen buffers and their moments are left untouched.
/// Throws DivergenceError, before changing anything, if a trainable
/// gradient is not finite.
void adam_step(ParamStore& store, AdamState& state, double lr);

/// lr_min + (lr_max - lr_min) * (1 + cos(pi * step / total)) / 2
double cosine_lr(std::uint64_t step, std::uint64_t total, double lr_max, double lr_min);

}  // namespace roomsense
