#include "roomsense/pca.hpp"

#include <cmath>
#include <sstream>

#include "roomsense/error.hpp"
#include "roomsense/rng.hpp"

namespace roomsense {

namespace {

using Matrix = std::vector<std::vector<double>>;

std::vector<double> multiply(const Matrix& a, const std::vector<double>& v) {
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += a[i][j] * v[j];
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool normalize(std::vector<double>& v) {
  const double norm = std::sqrt(dot(v, v));
  if (!(norm > 0.0)) return false;
  for (double& x : v) x /= norm;
  return true;
}

void orthogonalize(std::vector<double>& v, const Matrix& basis) {
  for (const auto& b : basis) {
    const double d = dot(v, b);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= d * b[i];
  }
}

void fix_sign(std::vector<double>& v) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  if (v[arg] < 0)
    for (double& x : v) x = -x;
}

}  // namespace

PcaModel pca_fit(const Tensor& features, std::size_t k) {
  if (features.rank() != 2) throw ShapeError("pca expects an (N, D) matrix, got " + features.shape_string());
  const std::size_t n = features.dim(0), d = features.dim(1);
  if (n < 3) throw ShapeError("pca needs at least 3 rows");
  if (d < 2) throw ShapeError("pca needs at least 2 dimensions");
  if (k < 1 || k > d) throw ConfigError("pca component count must lie in [1, D]");

  PcaModel m;
  m.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m.mean[j] += features.at(i, j);
  for (double& v : m.mean) v /= static_cast<double>(n);

  Matrix cov(d, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a) {
      const double xa = features.at(i, a) - m.mean[a];
      for (std::size_t b = a; b < d; ++b) cov[a][b] += xa * (features.at(i, b) - m.mean[b]);
    }
  double total = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) cov[b][a] = cov[a][b] /= static_cast<double>(n);
    total += cov[a][a];
  }
  if (!(total > 0.0)) throw DegenerateError("features", "features have zero variance; no principal axes");

  Rng rng(0x5043415f5354ULL);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.normal();
    orthogonalize(v, m.components);
    normalize(v);
    double lambda = 0.0;
    for (std::size_t it = 0; it < kPcaMaxIterations; ++it) {
      auto next = multiply(cov, v);
      orthogonalize(next, m.components);
      if (!normalize(next)) break;  // remaining spectrum is zero; keep v
      double diff = 0.0;
      for (std::size_t i = 0; i < d; ++i) diff = std::max(diff, std::abs(next[i] - v[i]));
      v = std::move(next);
      if (diff < kPcaTolerance) break;
    }
    lambda = std::max(0.0, dot(v, multiply(cov, v)));
    // deflate so the next power iteration sees the remaining spectrum
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) cov[a][b] -= lambda * v[a] * v[b];
    fix_sign(v);
    m.components.push_back(v);
    m.eigenvalues.push_back(lambda);
    m.explained.push_back(std::min(1.0, lambda / total));
  }
  return m;
}

Tensor pca_project(const PcaModel& model, const Tensor& features) {
  if (features.rank() != 2 || features.dim(1) != model.mean.size())
    throw ShapeError("pca model expects " + std::to_string(model.mean.size()) + " features, got " + features.shape_string());
  const std::size_t n = features.dim(0), d = model.mean.size(), k = model.components.size();
  Tensor out({n, k});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += (features.at(i, j) - model.mean[j]) * model.components[c][j];
      out.at(i, c) = s;
    }
  return out;
}

void to_json(nlohmann::json& j, const PcaModel& m) {
  j = {{"mean", m.mean}, {"components", m.components}, {"eigenvalues", m.eigenvalues}, {"explained", m.explained}};
}

void from_json(const nlohmann::json& j, PcaModel& m) {
  m.mean = j.at("mean").get<std::vector<double>>();
  m.components = j.at("components").get<std::vector<std::vector<double>>>();
  m.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
  m.explained = j.at("explained").get<std::vector<double>>();
}

std::string projection_csv(const Tensor& projected, const std::vector<std::string>& label_names,
                           const std::vector<std::vector<int>>& labels) {
  std::ostringstream os;
  os.precision(17);
  const std::size_t n = projected.dim(0), k = projected.dim(1);
  for (std::size_t c = 0; c < k; ++c) os << (c ? "," : "") << "pc" << c + 1;
  for (const auto& l : label_names) os << ',' << l;
  os << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) os << (c ? "," : "") << projected.at(i, c);
    for (std::size_t l = 0; l < label_names.size(); ++l) os << ',' << labels[l][i];
    os << '\n';
  }
  return os.str();
}

}  // namespace roomsense
