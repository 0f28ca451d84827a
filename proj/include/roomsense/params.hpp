#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace roomsense {

class Rng;

/// A named buffer with its gradient. State buffers (batch-norm running
/// statistics) travel with checkpoints but are never optimized or counted.
struct Buffer {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool trainable = true;
  bool state = false;

  std::size_t size() const noexcept { return value.size(); }
};

/// Flat registry of a model's buffers. Layers refer to buffers by index, so
/// a model (and its store) can be copied by value.
class ParamStore {
 public:
  std::size_t add(std::string name, std::vector<std::size_t> shape, double fill = 0.0);
  std::size_t add_state(std::string name, std::vector<std::size_t> shape, double fill = 0.0);

  Buffer& operator[](std::size_t i) { return buffers_[i]; }
  const Buffer& operator[](std::size_t i) const { return buffers_[i]; }
  std::size_t size() const noexcept { return buffers_.size(); }
  std::vector<Buffer>& buffers() noexcept { return buffers_; }
  const std::vector<Buffer>& buffers() const noexcept { return buffers_; }

  const Buffer* find(const std::string& name) const noexcept;
  Buffer* find(const std::string& name) noexcept;

  void zero_grad() noexcept;
  /// Marks every buffer whose name starts with `prefix` as (non-)trainable.
  void set_trainable(const std::string& prefix, bool trainable);

  std::size_t trainable_count() const noexcept;
  /// All non-state parameters, frozen or not.
  std::size_t parameter_count() const noexcept;

  /// Values of every buffer (parameters and state), for restoring the best
  /// epoch during early stopping.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  std::vector<Buffer> buffers_;
};

/// Uniform in [-bound, bound].
void init_uniform(Buffer& b, double bound, Rng& rng);
/// Glorot/Xavier uniform bound sqrt(6 / (fan_in + fan_out)).
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

}  // namespace roomsense
