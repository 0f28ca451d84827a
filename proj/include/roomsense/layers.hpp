#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "roomsense/params.hpp"
#include "roomsense/tensor.hpp"

namespace roomsense {

enum class Mode { train, eval };

// Layers own their forward caches but not their parameters: buffers live
// in a ParamStore and are addressed by index. backward() must follow the
// matching forward() and accumulates into the buffers' gradients.

/// Same-length 1-D cross-correlation without bias:
/// out[n,f,t] = sum_{c,k} w[f,c,k] * x[n,c,t+k-left], zero padded with
/// left = (K-1)/2 and right = K/2.
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(ParamStore& ps, const std::string& name, std::size_t in_channels, std::size_t filters, std::size_t kernel);

  Tensor forward(const ParamStore& ps, const Tensor& x);
  Tensor backward(ParamStore& ps, const Tensor& grad_out);

  std::size_t in_channels() const noexcept { return in_; }
  std::size_t filters() const noexcept { return out_; }
  std::size_t kernel() const noexcept { return k_; }
  std::size_t weight() const noexcept { return w_; }

 private:
  std::size_t in_ = 0, out_ = 0, k_ = 0, w_ = 0;
  std::vector<std::size_t> in_shape_;
  std::vector<double> cols_;  // im2col of the last input, (C*K, N*L)
};

/// Per-channel normalization over (N, L) with affine gamma/beta. Running
/// statistics are state buffers updated with momentum in train mode.
class BatchNorm1d {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm1d() = default;
  BatchNorm1d(ParamStore& ps, const std::string& name, std::size_t channels);

  Tensor forward(ParamStore& ps, const Tensor& x, Mode mode);
  Tensor backward(ParamStore& ps, const Tensor& grad_out);

  std::size_t gamma() const noexcept { return gamma_; }
  std::size_t beta() const noexcept { return beta_; }
  std::size_t running_mean() const noexcept { return mean_; }
  std::size_t running_var() const noexcept { return var_; }

 private:
  std::size_t channels_ = 0;
  std::size_t gamma_ = 0, beta_ = 0, mean_ = 0, var_ = 0, tracked_ = 0;
  Mode mode_ = Mode::train;
  std::vector<std::size_t> shape_;
  std::vector<double> xhat_;
  std::vector<double> inv_std_;
};

class Relu {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  std::vector<std::uint8_t> mask_;
};

/// Inverted dropout: in train mode each element is kept with probability
/// 1-p and scaled by 1/(1-p); the mask is drawn from Rng(seed). Identity in
/// eval mode.
class Dropout {
 public:
  explicit Dropout(double p = 0.0);

  Tensor forward(const Tensor& x, Mode mode, std::uint64_t seed);
  Tensor backward(const Tensor& grad_out) const;
  double rate() const noexcept { return p_; }

 private:
  double p_ = 0.0;
  std::vector<double> scale_;  // per-element multiplier of the last forward
};

/// (N, C, L) -> (N, C), mean over time.
class GlobalAvgPool {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  std::vector<std::size_t> shape_;
};

/// Max over a centred window of `kernel` steps with stride 1; out-of-range
/// positions are ignored (same length as the input).
class MaxPool1d {
 public:
  explicit MaxPool1d(std::size_t kernel = 3) : k_(kernel) {}
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  std::size_t k_;
  std::vector<std::size_t> shape_;
  std::vector<std::size_t> argmax_;
};

/// (N, D) -> (N, M) affine map with weight (D, M) and bias (M).
class Dense {
 public:
  Dense() = default;
  Dense(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out);

  Tensor forward(const ParamStore& ps, const Tensor& x);
  Tensor backward(ParamStore& ps, const Tensor& grad_out);

  std::size_t in() const noexcept { return in_; }
  std::size_t out() const noexcept { return out_; }
  std::size_t weight() const noexcept { return w_; }
  std::size_t bias() const noexcept { return b_; }

 private:
  std::size_t in_ = 0, out_ = 0, w_ = 0, b_ = 0;
  Tensor x_;
};

enum class LstmOutput { sequence, last };

/// Single-layer LSTM, gate order (i, f, g, o) with one bias vector per gate
/// set: z = x W_x + h W_h + b, W_x (C, 4H), W_h (H, 4H), b (4H).
/// Bidirectional runs a second pass over the reversed sequence and
/// concatenates along channels. `last` returns each direction's final state
/// (forward: t = L-1, reverse: t = 0).
class Lstm {
 public:
  Lstm() = default;
  Lstm(ParamStore& ps, const std::string& name, std::size_t in, std::size_t hidden, bool bidirectional,
       LstmOutput output);

  /// x (N, C, L) -> (N, H*dirs, L) or (N, H*dirs)
  Tensor forward(const ParamStore& ps, const Tensor& x);
  Tensor backward(ParamStore& ps, const Tensor& grad_out);

  std::size_t in() const noexcept { return in_; }
  std::size_t hidden() const noexcept { return hidden_; }
  std::size_t directions() const noexcept { return dirs_; }
  std::size_t output_channels() const noexcept { return hidden_ * dirs_; }
  /// Buffer indices (W_x, W_h, b) of direction d.
  std::size_t wx(std::size_t d) const noexcept { return wx_[d]; }
  std::size_t wh(std::size_t d) const noexcept { return wh_[d]; }
  std::size_t b(std::size_t d) const noexcept { return b_[d]; }

 private:
  struct Trace {
    // per step, row-major (N, ...) blocks
    std::vector<std::vector<double>> x, gates, c, tanh_c, h;  // gates are post-activation (N, 4H)
  };

  std::size_t in_ = 0, hidden_ = 0, dirs_ = 1;
  LstmOutput output_ = LstmOutput::sequence;
  std::size_t wx_[2] = {0, 0}, wh_[2] = {0, 0}, b_[2] = {0, 0};
  std::size_t batch_ = 0, steps_ = 0;
  Trace trace_[2];
};

// Pointwise helpers shared by models and losses.
Tensor sigmoid(const Tensor& x);
Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out);
/// Row-wise softmax of an (N, K) tensor.
Tensor softmax_over_classes(const Tensor& x);
Tensor softmax_backward(const Tensor& y, const Tensor& grad_out);

/// (N, C, L) <-> (N*L, C): each time step becomes a row.
Tensor to_steps(const Tensor& x);
Tensor from_steps(const Tensor& rows, std::size_t n, std::size_t l);

/// Elementwise a + b, shapes equal.
Tensor add(const Tensor& a, const Tensor& b);
/// Concatenation along the channel axis of (N, C_i, L) tensors.
Tensor concat_channels(const std::vector<const Tensor*>& parts);
/// Inverse of concat_channels: the slice [offset, offset+count) of channels.
Tensor slice_channels(const Tensor& x, std::size_t offset, std::size_t count);

}  // namespace roomsense
