#include "roomsense/loss.hpp"

#include <algorithm>
#include <cmath>

#include "roomsense/error.hpp"
#include "roomsense/layers.hpp"

namespace roomsense {

LossResult bce_with_logits(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape())
    throw ShapeError("bce: logits " + logits.shape_string() + " vs targets " + targets.shape_string());
  const double count = static_cast<double>(logits.size());
  LossResult r{0.0, Tensor(logits.shape())};
  const Tensor p = sigmoid(logits);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i], y = targets[i];
    r.value += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    r.grad[i] = (p[i] - y) / count;
  }
  r.value /= count;
  return r;
}

LossResult mse(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape())
    throw ShapeError("mse: prediction " + pred.shape_string() + " vs target " + target.shape_string());
  const double count = static_cast<double>(pred.size());
  LossResult r{0.0, Tensor(pred.shape())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    r.value += d * d;
    r.grad[i] = 2.0 * d / count;
  }
  r.value /= count;
  return r;
}

LossResult softmax_cross_entropy(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape() || logits.rank() != 2)
    throw ShapeError("softmax cross entropy: logits " + logits.shape_string() + " vs targets " +
                     targets.shape_string());
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  LossResult r{0.0, Tensor(logits.shape())};
  const Tensor p = softmax_over_classes(logits);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at(i, j));
    double lse = 0.0;
    for (std::size_t j = 0; j < k; ++j) lse += std::exp(logits.at(i, j) - mx);
    lse = mx + std::log(lse);
    for (std::size_t j = 0; j < k; ++j) {
      r.value -= targets.at(i, j) * (logits.at(i, j) - lse);
      r.grad.at(i, j) = (p.at(i, j) - targets.at(i, j)) / static_cast<double>(n);
    }
  }
  r.value /= static_cast<double>(n);
  return r;
}

}  // namespace roomsense
