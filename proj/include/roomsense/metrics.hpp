#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "roomsense/models.hpp"
#include "roomsense/pipeline.hpp"

namespace roomsense {

inline constexpr double kDefaultThreshold = 0.5;

struct ClassCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<ClassCounts> counts;
};

struct ClassMetrics {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // positives in the ground truth
};

struct Metrics {
  std::vector<ClassMetrics> classes;
  double accuracy = 0.0;  // element-wise over the (N, K) decision matrix
  std::size_t n = 0;
  std::vector<std::string> warnings;

  double f1(std::size_t k) const { return classes.at(k).f1; }
  double mean_f1() const;
};

struct Evaluation {
  Metrics metrics;
  ConfusionMatrix confusion;
};

/// Decisions are probability >= threshold.
ConfusionMatrix confusion(const Tensor& probabilities, const BinaryMatrix& truth, const std::vector<std::string>& classes,
                          double threshold = kDefaultThreshold);
/// Precision and recall are 0 when their denominators are; a class with no
/// positives gets a warning.
Metrics metrics_from(const ConfusionMatrix& cm);
Evaluation evaluate_probabilities(const Tensor& probabilities, const WindowSet& test, double threshold = kDefaultThreshold);
Evaluation evaluate(const Classifier& classifier, const WindowSet& test, double threshold = kDefaultThreshold);

void to_json(nlohmann::json& j, const Metrics& m);
void to_json(nlohmann::json& j, const ConfusionMatrix& c);
void to_json(nlohmann::json& j, const Evaluation& e);
/// One row per class: class,tp,fp,fn,tn,precision,recall,f1,support.
std::string evaluation_csv(const Evaluation& e);

}  // namespace roomsense
