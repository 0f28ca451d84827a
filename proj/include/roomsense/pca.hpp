#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "roomsense/tensor.hpp"

namespace roomsense {

struct PcaModel {
  std::vector<double> mean;                     // D
  std::vector<std::vector<double>> components;  // k unit vectors of length D
  std::vector<double> eigenvalues;              // covariance eigenvalues, descending
  std::vector<double> explained;                // eigenvalue / total variance
};

inline constexpr double kPcaTolerance = 1e-10;
inline constexpr std::size_t kPcaMaxIterations = 10000;

/// Top-k principal axes of the (N, D) rows by power iteration with
/// deflation on the population covariance. Each component's
/// largest-magnitude entry is positive.
PcaModel pca_fit(const Tensor& features, std::size_t k = 2);
/// (N, k) coordinates of the centred rows.
Tensor pca_project(const PcaModel& model, const Tensor& features);

void to_json(nlohmann::json& j, const PcaModel& m);
void from_json(const nlohmann::json& j, PcaModel& m);
/// Header pc1,pc2,... plus an optional label column per row.
std::string projection_csv(const Tensor& projected, const std::vector<std::string>& label_names = {},
                           const std::vector<std::vector<int>>& labels = {});

}  // namespace roomsense
