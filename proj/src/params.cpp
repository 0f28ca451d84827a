#include "roomsense/params.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "roomsense/error.hpp"
#include "roomsense/rng.hpp"

namespace roomsense {

namespace {
std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}
}  // namespace

std::size_t ParamStore::add(std::string name, std::vector<std::size_t> shape, double fill) {
  if (find(name)) throw SchemaError("duplicate buffer name '" + name + "'");
  const std::size_t n = product(shape);
  buffers_.push_back({std::move(name), std::move(shape), std::vector<double>(n, fill), std::vector<double>(n, 0.0),
                      true, false});
  return buffers_.size() - 1;
}

std::size_t ParamStore::add_state(std::string name, std::vector<std::size_t> shape, double fill) {
  const std::size_t i = add(std::move(name), std::move(shape), fill);
  buffers_[i].trainable = false;
  buffers_[i].state = true;
  buffers_[i].grad.clear();
  return i;
}

const Buffer* ParamStore::find(const std::string& name) const noexcept {
  for (const auto& b : buffers_)
    if (b.name == name) return &b;
  return nullptr;
}

Buffer* ParamStore::find(const std::string& name) noexcept {
  for (auto& b : buffers_)
    if (b.name == name) return &b;
  return nullptr;
}

void ParamStore::zero_grad() noexcept {
  for (auto& b : buffers_) std::fill(b.grad.begin(), b.grad.end(), 0.0);
}

void ParamStore::set_trainable(const std::string& prefix, bool trainable) {
  for (auto& b : buffers_)
    if (!b.state && b.name.compare(0, prefix.size(), prefix) == 0) b.trainable = trainable;
}

std::size_t ParamStore::trainable_count() const noexcept {
  std::size_t n = 0;
  for (const auto& b : buffers_)
    if (b.trainable && !b.state) n += b.size();
  return n;
}

std::size_t ParamStore::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& b : buffers_)
    if (!b.state) n += b.size();
  return n;
}

std::vector<std::vector<double>> ParamStore::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(buffers_.size());
  for (const auto& b : buffers_) out.push_back(b.value);
  return out;
}

void ParamStore::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != buffers_.size()) throw ShapeError("snapshot does not match parameter store");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != buffers_[i].size()) throw ShapeError("snapshot buffer size mismatch");
    buffers_[i].value = values[i];
  }
}

void init_uniform(Buffer& b, double bound, Rng& rng) {
  for (double& v : b.value) v = rng.uniform(-bound, bound);
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace roomsense
