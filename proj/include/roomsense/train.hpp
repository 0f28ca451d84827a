#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "roomsense/models.hpp"
#include "roomsense/pipeline.hpp"

namespace roomsense {

enum class Schedule { cosine, constant };
std::string to_string(Schedule s);
Schedule parse_schedule(std::string_view s);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double lr_max = 1e-3;
  double lr_min = 1e-5;
  Schedule schedule = Schedule::cosine;
  bool early_stopping = true;
  std::size_t patience = 10;
  double min_delta = 1e-4;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double valid_loss = std::numeric_limits<double>::quiet_NaN();
  double valid_accuracy = std::numeric_limits<double>::quiet_NaN();
  double lr = 0.0;
  double seconds = 0.0;
};

struct History {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0 when there was no validation data
  bool stopped_early = false;

  std::size_t size() const noexcept { return epochs.size(); }
  double best_valid_loss() const;
  double total_seconds() const;
};

/// Wall-clock seconds go under "meta" so reports compare byte-for-byte
/// once that block is removed.
void to_json(nlohmann::json& j, const History& h);
void from_json(const nlohmann::json& j, History& h);
std::string history_csv(const History& h);

/// Tracks the best validation loss. An epoch improves when its loss is
/// below best - min_delta; training stops once more than `patience` epochs
/// have passed without improvement.
class EarlyStopper {
 public:
  EarlyStopper(std::size_t patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}

  /// Returns true when `loss` is a new best.
  bool update(double loss);
  bool should_stop() const noexcept { return since_best_ > patience_; }
  double best() const noexcept { return best_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t since_best_ = 0;
};

enum class Objective { bce, softmax_cross_entropy, mse };

/// Generic mini-batch loop: Adam, cosine or constant LR over the total step
/// count, validation after every epoch, best-epoch restore when early
/// stopping is on. `valid_x` may be empty.
History fit(Model& model, const Tensor& x, const Tensor& y, const Tensor& valid_x, const Tensor& valid_y,
            Objective objective, const TrainConfig& cfg);

/// Targets for one network: the full (N, K) matrix for multi-label heads or
/// the two-column one-hot of class `class_index` for single-label heads.
Tensor targets_for(const Model& model, const BinaryMatrix& y, std::size_t class_index);

/// Trains one classifier network in place.
History train_classifier(Model& model, const WindowSet& train, const WindowSet& valid, const TrainConfig& cfg,
                         std::size_t class_index = 0);

using ModelFactory = std::function<std::unique_ptr<Model>(std::uint64_t seed)>;

struct TrainedClassifier {
  Classifier classifier;
  std::vector<History> histories;  // one per member
};

/// Builds and trains every member: `members` independently seeded networks
/// for multi-label heads (an ensemble), one network per class for
/// single-label heads. Member i trains with seed derive_seed(cfg.seed, i).
TrainedClassifier fit_classifier(const ModelFactory& factory, const WindowSet& train, const WindowSet& valid,
                                 const TrainConfig& cfg, std::size_t members = 1);
/// Same, from an architecture document; Inception's ensemble size sets the
/// member count.
TrainedClassifier fit_classifier(const nlohmann::json& architecture, const WindowSet& train, const WindowSet& valid,
                                 const TrainConfig& cfg);

/// MSE reconstruction training on unlabeled windows; a seeded 10% of the
/// windows is held out for validation.
History train_autoencoder(Model& autoencoder, const WindowSet& unlabeled, const TrainConfig& cfg,
                          double valid_fraction = 0.1);

/// Mean loss of `model` on (x, y) in eval mode.
double evaluate_loss(Model& model, const Tensor& x, const Tensor& y, Objective objective);

}  // namespace roomsense
