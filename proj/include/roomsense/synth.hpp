#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "roomsense/frame.hpp"

namespace roomsense {

/// Alternating-renewal event schedule. Durations are in samples.
struct ScheduleConfig {
  double mean_vacancy = 300.0;
  double mean_occupancy = 60.0;
  std::size_t max_persons = 3;
  double window_open_probability = 0.5;  // per occupancy block
  double mean_window_open = 35.0;
  double independent_window_rate = 1.0 / 4000.0;  // per vacant sample
};

/// First-order dynamics per 120 s step.
struct DynamicsConfig {
  double co2_ambient = 420.0;
  double co2_emission = 25.0;  // ppm per person per step
  double co2_decay_closed = 0.02;
  double co2_decay_open = 0.25;
  double o2_ambient = 20.9;
  double o2_coupling = 5e-4;  // o2 drop per ppm of excess co2
  double tvoc_ambient = 100.0;
  double tvoc_coupling = 0.8;
  double humidity_ambient = 7.0;  // g/m^3
  double humidity_emission = 0.03;
  double humidity_decay_closed = 0.01;
  double humidity_decay_open = 0.2;
  double temperature_indoor = 21.0;
  double temperature_outdoor = 12.0;
  double temperature_heat = 0.03;  // degrees per person per step
  double temperature_decay_closed = 0.05;
  double temperature_decay_open = 0.15;
  double sound_ambient = 35.0;
  double sound_per_person = 8.0;
  double drift_persistence = 0.98;  // AR(1) coefficient of unmodelled channels
  double particulate_drift = 1.0;   // innovation std of the shared particulate level
};

/// Injected defects, per 1000 samples.
struct DefectConfig {
  double missing_runs = 0.0;  // per channel
  double missing_mean_length = 3.0;
  double gaps = 0.0;
  double gap_mean_length = 30.0;
};

struct ScenarioConfig {
  std::size_t duration = 20000;
  std::uint64_t seed = 7;
  std::size_t devices = 1;
  std::int64_t start_time = 1600000080;
  ScheduleConfig schedule;
  DynamicsConfig dynamics;
  std::map<std::string, double> noise;  // per-channel std; channels not listed use defaults
  DefectConfig defects;

  void validate() const;
  double noise_for(const std::string& channel) const;
};

/// Noise std used for a channel when the scenario does not list it.
double default_noise(const std::string& channel);

void to_json(nlohmann::json& j, const ScenarioConfig& c);
void from_json(const nlohmann::json& j, ScenarioConfig& c);

/// One labelled device frame with all canonical channels and the person
/// count and window_open labels.
SensorFrame generate_frame(const ScenarioConfig& cfg);
/// Runs the dynamics over a given person-count and window schedule (equal
/// lengths). Defects are not injected.
SensorFrame simulate(const ScenarioConfig& cfg, const std::vector<std::int64_t>& persons,
                     const std::vector<std::int64_t>& windows);
/// `devices` unlabelled frames; device i uses seed derive_seed(cfg.seed, i)
/// and jittered ambient levels.
std::vector<SensorFrame> generate_fleet(const ScenarioConfig& cfg, std::size_t devices);

}  // namespace roomsense
