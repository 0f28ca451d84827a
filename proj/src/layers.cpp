#include "roomsense/layers.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "roomsense/error.hpp"
#include "roomsense/rng.hpp"

namespace roomsense {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::RowVectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::RowVectorXd>;

// Adds the column sums of a row-major (rows, cols) block to out, in row
// order whatever the alignment of either buffer.
void add_column_sums(double* out, const double* g, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j] += g[i * cols + j];
}

void require_rank(const Tensor& x, std::size_t rank, const char* who) {
  if (x.rank() != rank)
    throw ShapeError(std::string(who) + " expects a rank-" + std::to_string(rank) + " tensor, got " + x.shape_string());
}

inline double sigm(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv1d

Conv1d::Conv1d(ParamStore& ps, const std::string& name, std::size_t in_channels, std::size_t filters,
               std::size_t kernel)
    : in_(in_channels), out_(filters), k_(kernel) {
  if (in_ == 0 || out_ == 0 || k_ == 0) throw ConfigError("conv1d dimensions must be >= 1");
  w_ = ps.add(name + ".weight", {out_, in_, k_});
}

Tensor Conv1d::forward(const ParamStore& ps, const Tensor& x) {
  require_rank(x, 3, "conv1d");
  if (x.dim(1) != in_)
    throw ShapeError("conv1d expects " + std::to_string(in_) + " input channels, got " + x.shape_string());
  const std::size_t n = x.dim(0), len = x.dim(2), left = (k_ - 1) / 2;
  const std::size_t rows = in_ * k_, cols = n * len;
  in_shape_ = x.shape();
  cols_.assign(rows * cols, 0.0);
  for (std::size_t c = 0; c < in_; ++c)
    for (std::size_t k = 0; k < k_; ++k) {
      double* dst = cols_.data() + (c * k_ + k) * cols;
      for (std::size_t b = 0; b < n; ++b) {
        const double* src = x.data() + (b * in_ + c) * len;
        for (std::size_t t = 0; t < len; ++t) {
          const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(left);
          if (s >= 0 && s < static_cast<std::ptrdiff_t>(len)) dst[b * len + t] = src[s];
        }
      }
    }
  RowMat out = ConstMatMap(ps[w_].value.data(), out_, rows) * ConstMatMap(cols_.data(), rows, cols);
  Tensor y({n, out_, len});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t f = 0; f < out_; ++f)
      std::copy_n(out.data() + f * cols + b * len, len, y.data() + (b * out_ + f) * len);
  return y;
}

Tensor Conv1d::backward(ParamStore& ps, const Tensor& grad_out) {
  const std::size_t n = in_shape_[0], len = in_shape_[2], left = (k_ - 1) / 2;
  const std::size_t rows = in_ * k_, cols = n * len;
  if (grad_out.shape() != std::vector<std::size_t>{n, out_, len}) throw ShapeError("conv1d backward shape mismatch");
  RowMat g(out_, cols);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t f = 0; f < out_; ++f)
      std::copy_n(grad_out.data() + (b * out_ + f) * len, len, g.data() + f * cols + b * len);
  const ConstMatMap cols_map(cols_.data(), rows, cols);
  MatMap(ps[w_].grad.data(), out_, rows).noalias() += g * cols_map.transpose();
  const RowMat gcols = ConstMatMap(ps[w_].value.data(), out_, rows).transpose() * g;
  Tensor gx(in_shape_);
  for (std::size_t c = 0; c < in_; ++c)
    for (std::size_t k = 0; k < k_; ++k) {
      const double* src = gcols.data() + (c * k_ + k) * cols;
      for (std::size_t b = 0; b < n; ++b) {
        double* dst = gx.data() + (b * in_ + c) * len;
        for (std::size_t t = 0; t < len; ++t) {
          const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(left);
          if (s >= 0 && s < static_cast<std::ptrdiff_t>(len)) dst[s] += src[b * len + t];
        }
      }
    }
  return gx;
}

// ---------------------------------------------------------------------------
// BatchNorm1d

BatchNorm1d::BatchNorm1d(ParamStore& ps, const std::string& name, std::size_t channels) : channels_(channels) {
  gamma_ = ps.add(name + ".gamma", {channels}, 1.0);
  beta_ = ps.add(name + ".beta", {channels}, 0.0);
  mean_ = ps.add_state(name + ".running_mean", {channels}, 0.0);
  var_ = ps.add_state(name + ".running_var", {channels}, 1.0);
  tracked_ = ps.add_state(name + ".tracked", {1}, 0.0);
}

Tensor BatchNorm1d::forward(ParamStore& ps, const Tensor& x, Mode mode) {
  require_rank(x, 3, "batchnorm1d");
  if (x.dim(1) != channels_) throw ShapeError("batchnorm1d channel mismatch: " + x.shape_string());
  const std::size_t n = x.dim(0), len = x.dim(2);
  const double m = static_cast<double>(n * len);
  const auto& gamma = ps[gamma_].value;
  const auto& beta = ps[beta_].value;
  auto& rmean = ps[mean_].value;
  auto& rvar = ps[var_].value;
  mode_ = mode;
  shape_ = x.shape();
  xhat_.assign(x.size(), 0.0);
  inv_std_.assign(channels_, 0.0);
  Tensor y(x.shape());

  if (mode == Mode::eval && ps[tracked_].value[0] == 0.0)
    throw StateError("batch norm running statistics used before any training-mode update");

  for (std::size_t c = 0; c < channels_; ++c) {
    double mean, var;
    if (mode == Mode::train) {
      mean = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t t = 0; t < len; ++t) mean += x.at(b, c, t);
      mean /= m;
      var = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t t = 0; t < len; ++t) var += (x.at(b, c, t) - mean) * (x.at(b, c, t) - mean);
      var /= m;
      rmean[c] = (1.0 - kMomentum) * rmean[c] + kMomentum * mean;
      rvar[c] = (1.0 - kMomentum) * rvar[c] + kMomentum * var;
    } else {
      mean = rmean[c];
      var = rvar[c];
    }
    const double inv = 1.0 / std::sqrt(var + kEps);
    inv_std_[c] = inv;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t i = (b * channels_ + c) * len + t;
        xhat_[i] = (x[i] - mean) * inv;
        y[i] = gamma[c] * xhat_[i] + beta[c];
      }
  }
  if (mode == Mode::train) ps[tracked_].value[0] = 1.0;
  return y;
}

Tensor BatchNorm1d::backward(ParamStore& ps, const Tensor& grad_out) {
  if (grad_out.shape() != shape_) throw ShapeError("batchnorm1d backward shape mismatch");
  const std::size_t n = shape_[0], len = shape_[2];
  const double m = static_cast<double>(n * len);
  const auto& gamma = ps[gamma_].value;
  auto& ggamma = ps[gamma_].grad;
  auto& gbeta = ps[beta_].grad;
  Tensor gx(shape_);
  for (std::size_t c = 0; c < channels_; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t i = (b * channels_ + c) * len + t;
        sum_g += grad_out[i];
        sum_gx += grad_out[i] * xhat_[i];
      }
    ggamma[c] += sum_gx;
    gbeta[c] += sum_g;
    const double scale = gamma[c] * inv_std_[c];
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t i = (b * channels_ + c) * len + t;
        gx[i] = mode_ == Mode::train ? scale * (grad_out[i] - sum_g / m - xhat_[i] * sum_gx / m) : scale * grad_out[i];
      }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Pointwise

Tensor Relu::forward(const Tensor& x) {
  Tensor y(x.shape());
  mask_.assign(x.size(), 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = x[i] > 0.0;
    y[i] = mask_[i] ? x[i] : 0.0;
  }
  return y;
}

Tensor Relu::backward(const Tensor& grad_out) const {
  Tensor gx(grad_out.shape());
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = mask_[i] ? grad_out[i] : 0.0;
  return gx;
}

Dropout::Dropout(double p) : p_(p) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, Mode mode, std::uint64_t seed) {
  if (mode == Mode::eval || p_ == 0.0) {
    scale_.assign(x.size(), 1.0);
    return x;
  }
  Rng rng(seed);
  const double keep = 1.0 / (1.0 - p_);
  scale_.resize(x.size());
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale_[i] = rng.uniform() < p_ ? 0.0 : keep;
    y[i] = x[i] * scale_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& grad_out) const {
  Tensor gx(grad_out.shape());
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = grad_out[i] * scale_[i];
  return gx;
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
  require_rank(x, 3, "global_avg_pool");
  shape_ = x.shape();
  const std::size_t n = x.dim(0), c = x.dim(1), len = x.dim(2);
  if (len == 0) throw ShapeError("global_avg_pool needs L >= 1");
  Tensor y({n, c});
  for (std::size_t i = 0; i < n * c; ++i) {
    double s = 0.0;
    for (std::size_t t = 0; t < len; ++t) s += x[i * len + t];
    y[i] = s / static_cast<double>(len);
  }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) const {
  Tensor gx(shape_);
  const std::size_t len = shape_[2];
  for (std::size_t i = 0; i < grad_out.size(); ++i)
    for (std::size_t t = 0; t < len; ++t) gx[i * len + t] = grad_out[i] / static_cast<double>(len);
  return gx;
}

Tensor MaxPool1d::forward(const Tensor& x) {
  require_rank(x, 3, "maxpool1d");
  shape_ = x.shape();
  const std::size_t rows = x.dim(0) * x.dim(1), len = x.dim(2), left = (k_ - 1) / 2;
  Tensor y(x.shape());
  argmax_.assign(x.size(), 0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t lo = t >= left ? t - left : 0;
      const std::size_t hi = std::min(len, t + k_ - left);
      std::size_t best = lo;
      for (std::size_t s = lo + 1; s < hi; ++s)
        if (x[r * len + s] > x[r * len + best]) best = s;
      y[r * len + t] = x[r * len + best];
      argmax_[r * len + t] = r * len + best;
    }
  return y;
}

Tensor MaxPool1d::backward(const Tensor& grad_out) const {
  Tensor gx(shape_);
  for (std::size_t i = 0; i < grad_out.size(); ++i) gx[argmax_[i]] += grad_out[i];
  return gx;
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out) : in_(in), out_(out) {
  if (in == 0 || out == 0) throw ConfigError("dense dimensions must be >= 1");
  w_ = ps.add(name + ".weight", {in, out});
  b_ = ps.add(name + ".bias", {out});
}

Tensor Dense::forward(const ParamStore& ps, const Tensor& x) {
  require_rank(x, 2, "dense");
  if (x.dim(1) != in_) throw ShapeError("dense expects " + std::to_string(in_) + " inputs, got " + x.shape_string());
  const std::size_t n = x.dim(0);
  x_ = x;
  Tensor y({n, out_});
  MatMap ym(y.data(), n, out_);
  ym.noalias() = ConstMatMap(x.data(), n, in_) * ConstMatMap(ps[w_].value.data(), in_, out_);
  ym.rowwise() += ConstVecMap(ps[b_].value.data(), out_);
  return y;
}

Tensor Dense::backward(ParamStore& ps, const Tensor& grad_out) {
  const std::size_t n = x_.dim(0);
  if (grad_out.shape() != std::vector<std::size_t>{n, out_}) throw ShapeError("dense backward shape mismatch");
  const ConstMatMap g(grad_out.data(), n, out_);
  MatMap(ps[w_].grad.data(), in_, out_).noalias() += ConstMatMap(x_.data(), n, in_).transpose() * g;
  add_column_sums(ps[b_].grad.data(), grad_out.data(), n, out_);
  Tensor gx({n, in_});
  MatMap(gx.data(), n, in_).noalias() = g * ConstMatMap(ps[w_].value.data(), in_, out_).transpose();
  return gx;
}

// ---------------------------------------------------------------------------
// Lstm

Lstm::Lstm(ParamStore& ps, const std::string& name, std::size_t in, std::size_t hidden, bool bidirectional,
           LstmOutput output)
    : in_(in), hidden_(hidden), dirs_(bidirectional ? 2 : 1), output_(output) {
  if (hidden < 1) throw ConfigError("LSTM hidden size must be >= 1");
  if (in < 1) throw ConfigError("LSTM input size must be >= 1");
  for (std::size_t d = 0; d < dirs_; ++d) {
    const std::string p = name + (d == 0 ? "" : ".reverse");
    wx_[d] = ps.add(p + ".w_input", {in, 4 * hidden});
    wh_[d] = ps.add(p + ".w_hidden", {hidden, 4 * hidden});
    b_[d] = ps.add(p + ".bias", {4 * hidden});
  }
}

Tensor Lstm::forward(const ParamStore& ps, const Tensor& x) {
  require_rank(x, 3, "lstm");
  if (x.dim(1) != in_) throw ShapeError("lstm expects " + std::to_string(in_) + " input channels, got " + x.shape_string());
  const std::size_t n = x.dim(0), len = x.dim(2), h = hidden_, g4 = 4 * hidden_;
  batch_ = n;
  steps_ = len;
  const std::size_t out_ch = h * dirs_;
  Tensor y = output_ == LstmOutput::sequence ? Tensor({n, out_ch, len}) : Tensor({n, out_ch});

  for (std::size_t d = 0; d < dirs_; ++d) {
    auto& tr = trace_[d];
    tr.x.assign(len, {});
    tr.gates.assign(len, {});
    tr.c.assign(len, {});
    tr.tanh_c.assign(len, {});
    tr.h.assign(len, {});
    const ConstMatMap wx(ps[wx_[d]].value.data(), in_, g4);
    const ConstMatMap wh(ps[wh_[d]].value.data(), h, g4);
    const ConstVecMap bias(ps[b_[d]].value.data(), g4);
    std::vector<double> h_prev(n * h, 0.0), c_prev(n * h, 0.0);
    for (std::size_t s = 0; s < len; ++s) {
      const std::size_t t = d == 0 ? s : len - 1 - s;
      auto& xs = tr.x[s];
      xs.resize(n * in_);
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < in_; ++c) xs[b * in_ + c] = x.at(b, c, t);
      auto& gates = tr.gates[s];
      gates.resize(n * g4);
      MatMap z(gates.data(), n, g4);
      z.noalias() = ConstMatMap(xs.data(), n, in_) * wx;
      z.noalias() += ConstMatMap(h_prev.data(), n, h) * wh;
      z.rowwise() += bias;
      auto& cs = tr.c[s];
      auto& tc = tr.tanh_c[s];
      auto& hs = tr.h[s];
      cs.resize(n * h);
      tc.resize(n * h);
      hs.resize(n * h);
      for (std::size_t b = 0; b < n; ++b) {
        double* zr = gates.data() + b * g4;
        for (std::size_t j = 0; j < h; ++j) {
          const double ig = sigm(zr[j]);
          const double fg = sigm(zr[h + j]);
          const double gg = std::tanh(zr[2 * h + j]);
          const double og = sigm(zr[3 * h + j]);
          zr[j] = ig, zr[h + j] = fg, zr[2 * h + j] = gg, zr[3 * h + j] = og;
          const double c = fg * c_prev[b * h + j] + ig * gg;
          cs[b * h + j] = c;
          tc[b * h + j] = std::tanh(c);
          hs[b * h + j] = og * tc[b * h + j];
        }
      }
      if (output_ == LstmOutput::sequence)
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t j = 0; j < h; ++j) y.at(b, d * h + j, t) = hs[b * h + j];
      h_prev = hs;
      c_prev = cs;
    }
    if (output_ == LstmOutput::last)
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t j = 0; j < h; ++j) y.at(b, d * h + j) = h_prev[b * h + j];
  }
  return y;
}

Tensor Lstm::backward(ParamStore& ps, const Tensor& grad_out) {
  const std::size_t n = batch_, len = steps_, h = hidden_, g4 = 4 * hidden_;
  const std::size_t out_ch = h * dirs_;
  const auto expected =
      output_ == LstmOutput::sequence ? std::vector<std::size_t>{n, out_ch, len} : std::vector<std::size_t>{n, out_ch};
  if (grad_out.shape() != expected) throw ShapeError("lstm backward shape mismatch");
  Tensor gx({n, in_, len});

  for (std::size_t d = 0; d < dirs_; ++d) {
    const auto& tr = trace_[d];
    const ConstMatMap wx(ps[wx_[d]].value.data(), in_, g4);
    const ConstMatMap wh(ps[wh_[d]].value.data(), h, g4);
    MatMap gwx(ps[wx_[d]].grad.data(), in_, g4);
    MatMap gwh(ps[wh_[d]].grad.data(), h, g4);
    VecMap gb(ps[b_[d]].grad.data(), g4);
    std::vector<double> dh_next(n * h, 0.0), dc_next(n * h, 0.0), dz(n * g4);
    const std::vector<double> zeros(n * h, 0.0);
    for (std::size_t s = len; s-- > 0;) {
      const std::size_t t = d == 0 ? s : len - 1 - s;
      const auto& gates = tr.gates[s];
      const auto& tc = tr.tanh_c[s];
      const auto& c_prev = s > 0 ? tr.c[s - 1] : zeros;
      const auto& h_prev = s > 0 ? tr.h[s - 1] : zeros;
      for (std::size_t b = 0; b < n; ++b) {
        const double* gr = gates.data() + b * g4;
        double* dzr = dz.data() + b * g4;
        for (std::size_t j = 0; j < h; ++j) {
          double dh = dh_next[b * h + j];
          if (output_ == LstmOutput::sequence)
            dh += grad_out.at(b, d * h + j, t);
          else if (s == len - 1)
            dh += grad_out.at(b, d * h + j);
          const double ig = gr[j], fg = gr[h + j], gg = gr[2 * h + j], og = gr[3 * h + j];
          const double tcv = tc[b * h + j];
          const double dc = dc_next[b * h + j] + dh * og * (1.0 - tcv * tcv);
          dzr[j] = dc * gg * ig * (1.0 - ig);
          dzr[h + j] = dc * c_prev[b * h + j] * fg * (1.0 - fg);
          dzr[2 * h + j] = dc * ig * (1.0 - gg * gg);
          dzr[3 * h + j] = dh * tcv * og * (1.0 - og);
          dc_next[b * h + j] = dc * fg;
        }
      }
      const ConstMatMap dzm(dz.data(), n, g4);
      gwx.noalias() += ConstMatMap(tr.x[s].data(), n, in_).transpose() * dzm;
      gwh.noalias() += ConstMatMap(h_prev.data(), n, h).transpose() * dzm;
      add_column_sums(gb.data(), dz.data(), n, g4);
      const RowMat dxs = dzm * wx.transpose();
      MatMap(dh_next.data(), n, h).noalias() = dzm * wh.transpose();
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < in_; ++c) gx.at(b, c, t) += dxs(b, c);
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Helpers

Tensor sigmoid(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigm(x[i]);
  return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_out) {
  Tensor gx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) gx[i] = grad_out[i] * y[i] * (1.0 - y[i]);
  return gx;
}

Tensor softmax_over_classes(const Tensor& x) {
  require_rank(x, 2, "softmax");
  const std::size_t n = x.dim(0), k = x.dim(1);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double mx = x.at(i, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, x.at(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += (y.at(i, j) = std::exp(x.at(i, j) - mx));
    for (std::size_t j = 0; j < k; ++j) y.at(i, j) /= sum;
  }
  return y;
}

Tensor softmax_backward(const Tensor& y, const Tensor& grad_out) {
  const std::size_t n = y.dim(0), k = y.dim(1);
  Tensor gx(y.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < k; ++j) dot += grad_out.at(i, j) * y.at(i, j);
    for (std::size_t j = 0; j < k; ++j) gx.at(i, j) = y.at(i, j) * (grad_out.at(i, j) - dot);
  }
  return gx;
}

Tensor to_steps(const Tensor& x) {
  require_rank(x, 3, "to_steps");
  const std::size_t n = x.dim(0), c = x.dim(1), len = x.dim(2);
  Tensor rows({n * len, c});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t t = 0; t < len; ++t) rows.at(b * len + t, k) = x.at(b, k, t);
  return rows;
}

Tensor from_steps(const Tensor& rows, std::size_t n, std::size_t len) {
  require_rank(rows, 2, "from_steps");
  if (rows.dim(0) != n * len) throw ShapeError("from_steps row count mismatch");
  const std::size_t c = rows.dim(1);
  Tensor x({n, c, len});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t k = 0; k < c; ++k)
      for (std::size_t t = 0; t < len; ++t) x.at(b, k, t) = rows.at(b * len + t, k);
  return x;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("add: " + a.shape_string() + " vs " + b.shape_string());
  Tensor y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  return y;
}

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
  const std::size_t n = parts.front()->dim(0), len = parts.front()->dim(2);
  std::size_t total = 0;
  for (const auto* p : parts) {
    if (p->rank() != 3 || p->dim(0) != n || p->dim(2) != len) throw ShapeError("concat_channels shape mismatch");
    total += p->dim(1);
  }
  Tensor y({n, total, len});
  for (std::size_t b = 0; b < n; ++b) {
    std::size_t off = 0;
    for (const auto* p : parts) {
      const std::size_t c = p->dim(1);
      std::copy_n(p->data() + b * c * len, c * len, y.data() + (b * total + off) * len);
      off += c;
    }
  }
  return y;
}

Tensor slice_channels(const Tensor& x, std::size_t offset, std::size_t count) {
  const std::size_t n = x.dim(0), c = x.dim(1), len = x.dim(2);
  if (offset + count > c) throw ShapeError("slice_channels out of range");
  Tensor y({n, count, len});
  for (std::size_t b = 0; b < n; ++b) std::copy_n(x.data() + (b * c + offset) * len, count * len, y.data() + b * count * len);
  return y;
}

}  // namespace roomsense
