#include "roomsense/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "roomsense/error.hpp"

namespace roomsense {

namespace {
std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}
}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + ")";
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 3) throw ShapeError("tensor rank must be 1..3");
  data_.assign(product(shape_), fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_.empty() || shape_.size() > 3) throw ShapeError("tensor rank must be 1..3");
  if (product(shape_) != data_.size())
    throw ShapeError("tensor shape " + roomsense::shape_string(shape_) + " does not match " + std::to_string(data_.size()) +
                     " values");
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string());
  return shape_[axis];
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const { return Tensor(std::move(shape), data_); }

Tensor Tensor::rows(std::size_t begin, std::size_t end) const {
  if (shape_.empty() || begin > end || end > shape_[0]) throw ShapeError("row range out of bounds");
  const std::size_t stride = row_stride();
  auto shape = shape_;
  shape[0] = end - begin;
  return Tensor(std::move(shape), std::vector<double>(data_.begin() + begin * stride, data_.begin() + end * stride));
}

Tensor Tensor::gather(std::span<const std::size_t> index) const {
  const std::size_t stride = row_stride();
  auto shape = shape_;
  shape[0] = index.size();
  std::vector<double> out(index.size() * stride);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= shape_[0]) throw ShapeError("gather index out of range");
    std::copy_n(data_.begin() + index[i] * stride, stride, out.begin() + i * stride);
  }
  return Tensor(std::move(shape), std::move(out));
}

std::size_t Tensor::row_stride() const noexcept {
  std::size_t s = 1;
  for (std::size_t i = 1; i < shape_.size(); ++i) s *= shape_[i];
  return s;
}

void Tensor::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::shape_string() const { return roomsense::shape_string(shape_); }

}  // namespace roomsense
