#pragma once

#include "roomsense/tensor.hpp"

namespace roomsense {

struct LossResult {
  double value = 0.0;
  Tensor grad;  // d value / d input, same shape as the input
};

/// Mean over all N*K entries of -[y log s(z) + (1-y) log(1-s(z))], evaluated
/// as max(z,0) - z*y + log1p(exp(-|z|)). Gradient (s(z) - y) / (N*K).
LossResult bce_with_logits(const Tensor& logits, const Tensor& targets);

/// Mean of squared differences over all elements; gradient 2(p - t)/count.
LossResult mse(const Tensor& pred, const Tensor& target);

/// Mean over rows of -sum_k y_k log softmax(z)_k; gradient (softmax - y)/N.
LossResult softmax_cross_entropy(const Tensor& logits, const Tensor& targets);

}  // namespace roomsense
