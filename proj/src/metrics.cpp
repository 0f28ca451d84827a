#include "roomsense/metrics.hpp"

#include <sstream>

#include "roomsense/error.hpp"

namespace roomsense {

double Metrics::mean_f1() const {
  if (classes.empty()) return 0.0;
  double s = 0.0;
  for (const auto& c : classes) s += c.f1;
  return s / static_cast<double>(classes.size());
}

ConfusionMatrix confusion(const Tensor& probabilities, const BinaryMatrix& truth, const std::vector<std::string>& classes,
                          double threshold) {
  if (probabilities.rank() != 2 || probabilities.dim(0) != truth.rows || probabilities.dim(1) != truth.cols)
    throw ShapeError("probabilities " + probabilities.shape_string() + " do not match labels (" +
                     std::to_string(truth.rows) + ", " + std::to_string(truth.cols) + ")");
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts.resize(truth.cols);
  for (std::size_t i = 0; i < truth.rows; ++i)
    for (std::size_t k = 0; k < truth.cols; ++k) {
      const bool pred = probabilities.at(i, k) >= threshold, actual = truth(i, k) != 0;
      auto& c = cm.counts[k];
      if (pred && actual) ++c.tp;
      else if (pred) ++c.fp;
      else if (actual) ++c.fn;
      else ++c.tn;
    }
  return cm;
}

Metrics metrics_from(const ConfusionMatrix& cm) {
  Metrics m;
  std::size_t correct = 0, cells = 0;
  for (std::size_t k = 0; k < cm.counts.size(); ++k) {
    const auto& c = cm.counts[k];
    ClassMetrics cls;
    cls.name = k < cm.classes.size() ? cm.classes[k] : "class" + std::to_string(k);
    cls.support = c.tp + c.fn;
    cls.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    cls.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    cls.f1 = cls.precision + cls.recall > 0 ? 2 * cls.precision * cls.recall / (cls.precision + cls.recall) : 0.0;
    if (cls.support == 0) m.warnings.push_back("class '" + cls.name + "' has no positive examples; recall reported as 0");
    m.classes.push_back(cls);
    correct += c.tp + c.tn;
    cells += c.total();
    m.n = c.total();
  }
  m.accuracy = cells > 0 ? static_cast<double>(correct) / static_cast<double>(cells) : 0.0;
  return m;
}

Evaluation evaluate_probabilities(const Tensor& probabilities, const WindowSet& test, double threshold) {
  Evaluation e;
  e.confusion = confusion(probabilities, test.y, test.classes, threshold);
  e.metrics = metrics_from(e.confusion);
  return e;
}

Evaluation evaluate(const Classifier& classifier, const WindowSet& test, double threshold) {
  if (test.count() == 0) throw ShapeError("no test windows");
  return evaluate_probabilities(classifier.predict(test.x), test, threshold);
}

void to_json(nlohmann::json& j, const Metrics& m) {
  nlohmann::json cls = nlohmann::json::array();
  for (const auto& c : m.classes)
    cls.push_back({{"class", c.name}, {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}});
  j = {{"classes", cls}, {"accuracy", m.accuracy}, {"n", m.n}, {"mean_f1", m.mean_f1()}, {"warnings", m.warnings}};
}

void to_json(nlohmann::json& j, const ConfusionMatrix& cm) {
  j = nlohmann::json::array();
  for (std::size_t k = 0; k < cm.counts.size(); ++k) {
    const auto& c = cm.counts[k];
    j.push_back({{"class", k < cm.classes.size() ? cm.classes[k] : ""}, {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}});
  }
}

void to_json(nlohmann::json& j, const Evaluation& e) { j = {{"metrics", e.metrics}, {"confusion", e.confusion}}; }

std::string evaluation_csv(const Evaluation& e) {
  std::ostringstream os;
  os.precision(17);
  os << "class,tp,fp,fn,tn,precision,recall,f1,support\n";
  for (std::size_t k = 0; k < e.confusion.counts.size(); ++k) {
    const auto& c = e.confusion.counts[k];
    const auto& m = e.metrics.classes[k];
    os << m.name << ',' << c.tp << ',' << c.fp << ',' << c.fn << ',' << c.tn << ',' << m.precision << ',' << m.recall
       << ',' << m.f1 << ',' << m.support << '\n';
  }
  return os.str();
}

}  // namespace roomsense
