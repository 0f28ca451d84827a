#include "roomsense/search.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "roomsense/error.hpp"
#include "roomsense/metrics.hpp"
#include "roomsense/rng.hpp"

namespace roomsense {

void SearchSpace::validate() const {
  if (grids.empty()) throw ConfigError("search space has no parameters");
  for (const auto& [name, values] : grids)
    if (values.empty()) throw ConfigError("search grid '" + name + "' is empty");
}

std::size_t SearchSpace::combinations() const {
  std::size_t n = 1;
  for (const auto& g : grids) n *= g.second.size();
  return n;
}

SearchSpace fcn_search_space(std::size_t blocks) {
  SearchSpace s;
  for (std::size_t b = 0; b < blocks; ++b) {
    std::vector<nlohmann::json> grid;
    for (int f = 8; f <= 32; f += 4) grid.emplace_back(f);
    s.grids.emplace_back("filters." + std::to_string(b), grid);
  }
  return s;
}

SearchSpace lstm_search_space() {
  SearchSpace s;
  std::vector<nlohmann::json> hidden, dropout;
  for (int h = 10; h <= 30; h += 2) hidden.emplace_back(h);
  for (int p = 1; p <= 5; ++p) dropout.emplace_back(p / 10.0);
  s.grids.emplace_back("hidden", hidden);
  s.grids.emplace_back("dropout", dropout);
  return s;
}

void to_json(nlohmann::json& j, const SearchSpace& s) {
  j = nlohmann::json::object();
  for (const auto& [name, values] : s.grids) j[name] = values;
}

void from_json(const nlohmann::json& j, SearchSpace& s) {
  if (!j.is_object()) throw ConfigError("search space must be an object of grids");
  s.grids.clear();
  // json objects iterate in key order, which keeps sampling reproducible
  for (const auto& [name, values] : j.items()) {
    if (!values.is_array()) throw ConfigError("search grid '" + name + "' must be an array");
    s.grids.emplace_back(name, values.get<std::vector<nlohmann::json>>());
  }
  s.validate();
}

SearchResult random_search(const SearchSpace& space, std::size_t trials, std::uint64_t seed,
                           const std::function<TrialOutcome(const nlohmann::json&, std::uint64_t)>& objective,
                           std::size_t threads) {
  space.validate();
  if (trials < 1) throw ConfigError("search needs at least one trial");
  SearchResult result;
  result.trials.resize(trials);
  for (std::size_t i = 0; i < trials; ++i) {
    auto& t = result.trials[i];
    t.index = i;
    t.seed = derive_seed(seed, i);
    Rng rng(t.seed);
    t.sample = nlohmann::json::object();
    for (const auto& [name, values] : space.grids) t.sample[name] = values[rng.below(values.size())];
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(trials);
  const auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < trials;) {
      auto& t = result.trials[i];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const auto outcome = objective(t.sample, t.seed);
        t.score = outcome.score;
        t.class_f1 = outcome.class_f1;
      } catch (...) {
        errors[i] = std::current_exception();
      }
      t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, trials));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t i = 1; i < trials; ++i)
    if (result.trials[i].score > result.trials[result.best].score) result.best = i;
  return result;
}

nlohmann::json apply_sample(nlohmann::json config, const nlohmann::json& sample) {
  for (const auto& [name, value] : sample.items()) {
    const auto dot = name.find('.');
    if (dot == std::string::npos) {
      if (!config.contains(name)) throw ConfigError("search parameter '" + name + "' is not a config key");
      config[name] = value;
      continue;
    }
    const std::string key = name.substr(0, dot);
    const std::size_t index = std::stoul(name.substr(dot + 1));
    if (!config.contains(key) || !config[key].is_array() || index >= config[key].size())
      throw ConfigError("search parameter '" + name + "' does not address a config array element");
    config[key][index] = value;
  }
  return config;
}

SearchResult tune_classifier(const nlohmann::json& architecture, const SearchSpace& space, const WindowSet& train,
                             const WindowSet& valid, const TrainConfig& cfg, std::size_t trials, std::uint64_t seed,
                             std::size_t threads) {
  if (valid.count() == 0) throw ConfigError("tuning needs validation windows");
  return random_search(
      space, trials, seed,
      [&](const nlohmann::json& sample, std::uint64_t trial_seed) {
        nlohmann::json arch = architecture;
        arch["config"] = apply_sample(architecture.at("config"), sample);
        TrainConfig c = cfg;
        c.seed = trial_seed;
        const auto trained = fit_classifier(arch, train, valid, c);
        const auto e = evaluate(trained.classifier, valid);
        TrialOutcome out;
        out.score = e.metrics.mean_f1();
        for (const auto& m : e.metrics.classes) out.class_f1.push_back(m.f1);
        return out;
      },
      threads);
}

void to_json(nlohmann::json& j, const TrialResult& t) {
  j = {{"index", t.index}, {"seed", t.seed}, {"sample", t.sample}, {"score", t.score}, {"class_f1", t.class_f1},
       {"meta", {{"seconds", t.seconds}}}};
}

void to_json(nlohmann::json& j, const SearchResult& r) {
  j = {{"trials", r.trials}, {"best", r.best}, {"best_sample", r.trials.at(r.best).sample}};
}

std::string search_csv(const SearchResult& r, const std::vector<std::string>& classes) {
  std::ostringstream os;
  os.precision(17);
  os << "index,seed";
  std::vector<std::string> names;
  if (!r.trials.empty())
    for (const auto& [name, v] : r.trials.front().sample.items()) names.push_back(name);
  for (const auto& n : names) os << ',' << n;
  os << ",score";
  const std::size_t k = r.trials.empty() ? 0 : r.trials.front().class_f1.size();
  for (std::size_t c = 0; c < k; ++c) os << ',' << (c < classes.size() ? classes[c] : "class" + std::to_string(c)) << "_f1";
  os << ",seconds\n";
  for (const auto& t : r.trials) {
    os << t.index << ',' << t.seed;
    for (const auto& n : names) os << ',' << t.sample.at(n).dump();
    os << ',' << t.score;
    for (double f : t.class_f1) os << ',' << f;
    os << ',' << t.seconds << '\n';
  }
  return os.str();
}

}  // namespace roomsense
