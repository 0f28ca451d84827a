#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "roomsense/params.hpp"
#include "roomsense/rng.hpp"
#include "roomsense/tensor.hpp"

namespace roomsense::testing {

inline constexpr double kStep = 1e-5;
inline constexpr double kTolerance = 1e-4;

struct GradReport {
  double max_rel = 0.0;
  std::size_t checked = 0;
  bool ok() const { return checked > 0 && max_rel < kTolerance; }
};

// |a - n| / max(|a|, |n|, 1e-6): relative for ordinary gradients, absolute
// for gradients that are numerically zero.
inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double sd = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, sd);
  return t;
}

// Up to `limit` distinct indices of [0, n), in a seeded order.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  idx.resize(std::min(n, limit));
  return idx;
}

// Checks d/dx and d/dparams of the scalar sum(forward(x) * r) for a fixed
// random r. `forward` must be deterministic; `backward` takes the upstream
// gradient, accumulates into the store's grads and returns d/dx (or an
// empty tensor when the input gradient is not produced).
inline GradReport check_gradients(Tensor x, ParamStore* store, const std::function<Tensor(const Tensor&)>& forward,
                                  const std::function<Tensor(const Tensor&)>& backward, Rng& rng,
                                  std::size_t per_buffer = 40) {
  const Tensor y0 = forward(x);
  const Tensor r = random_tensor(y0.shape(), rng);
  const auto objective = [&](const Tensor& in) {
    const Tensor y = forward(in);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
    return s;
  };

  if (store) store->zero_grad();
  forward(x);
  const Tensor gx = backward(r);
  std::vector<std::vector<double>> grads;
  if (store)
    for (const auto& b : store->buffers()) grads.push_back(b.grad);

  GradReport rep;
  const auto record = [&](double analytic, double numeric) {
    rep.max_rel = std::max(rep.max_rel, rel_error(analytic, numeric));
    ++rep.checked;
  };

  if (gx.size() > 0) {
    for (std::size_t i : sample_indices(x.size(), per_buffer, rng)) {
      const double keep = x[i];
      x[i] = keep + kStep;
      const double up = objective(x);
      x[i] = keep - kStep;
      const double down = objective(x);
      x[i] = keep;
      record(gx[i], (up - down) / (2 * kStep));
    }
  }
  if (store) {
    for (std::size_t b = 0; b < store->size(); ++b) {
      auto& buf = (*store)[b];
      if (buf.state || !buf.trainable) continue;
      for (std::size_t i : sample_indices(buf.size(), per_buffer, rng)) {
        const double keep = buf.value[i];
        buf.value[i] = keep + kStep;
        const double up = objective(x);
        buf.value[i] = keep - kStep;
        const double down = objective(x);
        buf.value[i] = keep;
        record(grads[b][i], (up - down) / (2 * kStep));
      }
    }
  }
  return rep;
}

// Loss gradients: compares grad of value(x) against central differences.
template <class LossFn>
GradReport check_loss(Tensor x, const Tensor& target, LossFn loss) {
  const Tensor g = loss(x, target).grad;
  GradReport rep;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + kStep;
    const double up = loss(x, target).value;
    x[i] = keep - kStep;
    const double down = loss(x, target).value;
    x[i] = keep;
    rep.max_rel = std::max(rep.max_rel, rel_error(g[i], (up - down) / (2 * kStep)));
    ++rep.checked;
  }
  return rep;
}

}  // namespace roomsense::testing
