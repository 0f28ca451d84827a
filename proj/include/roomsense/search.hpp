#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "roomsense/train.hpp"

namespace roomsense {

/// Named discrete grids, sampled in declaration order. A name of the form
/// "filters.1" addresses element 1 of the config's "filters" array.
struct SearchSpace {
  std::vector<std::pair<std::string, std::vector<nlohmann::json>>> grids;

  void validate() const;
  std::size_t combinations() const;
};

/// FCN: filters 8..32 step 4 for each of `blocks` blocks.
SearchSpace fcn_search_space(std::size_t blocks = 2);
/// LSTM: hidden 10..30 step 2, dropout 0.1..0.5 step 0.1.
SearchSpace lstm_search_space();

void to_json(nlohmann::json& j, const SearchSpace& s);
void from_json(const nlohmann::json& j, SearchSpace& s);

struct TrialOutcome {
  double score = 0.0;  // higher is better
  std::vector<double> class_f1;
};

struct TrialResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  nlohmann::json sample;
  double score = 0.0;
  std::vector<double> class_f1;
  double seconds = 0.0;
};

struct SearchResult {
  std::vector<TrialResult> trials;  // in trial order
  std::size_t best = 0;             // highest score, earliest on ties

  const TrialResult& best_trial() const { return trials.at(best); }
};

/// Trial i draws one grid value per parameter with Rng(derive_seed(seed, i))
/// and is evaluated with that same seed. Trials run on up to `threads`
/// threads; results do not depend on the thread count.
SearchResult random_search(const SearchSpace& space, std::size_t trials, std::uint64_t seed,
                           const std::function<TrialOutcome(const nlohmann::json& sample, std::uint64_t seed)>& objective,
                           std::size_t threads = 1);

/// Copies sampled values into an architecture config.
nlohmann::json apply_sample(nlohmann::json config, const nlohmann::json& sample);

/// Tunes a classifier architecture: every trial trains with fit_classifier
/// and scores the mean per-class F1 on `valid`.
SearchResult tune_classifier(const nlohmann::json& architecture, const SearchSpace& space, const WindowSet& train,
                             const WindowSet& valid, const TrainConfig& cfg, std::size_t trials, std::uint64_t seed,
                             std::size_t threads = 1);

void to_json(nlohmann::json& j, const TrialResult& t);
void to_json(nlohmann::json& j, const SearchResult& r);
/// One row per trial: index, seed, each sampled parameter, score, per-class F1, seconds.
std::string search_csv(const SearchResult& r, const std::vector<std::string>& classes = {});

}  // namespace roomsense
