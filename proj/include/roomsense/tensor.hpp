#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace roomsense {

/// Dense row-major f64 array with up to three axes, used as (N, C, L) for
/// sequences and (N, D) for feature matrices.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double& at(std::size_t i, std::size_t j) noexcept { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const noexcept { return data_[i * shape_[1] + j]; }
  double& at(std::size_t n, std::size_t c, std::size_t l) noexcept {
    return data_[(n * shape_[1] + c) * shape_[2] + l];
  }
  double at(std::size_t n, std::size_t c, std::size_t l) const noexcept {
    return data_[(n * shape_[1] + c) * shape_[2] + l];
  }

  /// Same storage, new shape with equal element count.
  Tensor reshaped(std::vector<std::size_t> shape) const;
  /// Rows [begin, end) along axis 0.
  Tensor rows(std::size_t begin, std::size_t end) const;
  /// Gathers the given rows along axis 0, in order.
  Tensor gather(std::span<const std::size_t> index) const;

  /// Elements per index of axis 0.
  std::size_t row_stride() const noexcept;
  void fill(double v) noexcept;
  std::string shape_string() const;

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

}  // namespace roomsense
