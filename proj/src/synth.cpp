#include "roomsense/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "roomsense/config_json.hpp"
#include "roomsense/error.hpp"
#include "roomsense/rng.hpp"

namespace roomsense {

double default_noise(const std::string& channel) {
  static const std::map<std::string, double> table = {
      {"pressure", 0.1}, {"temperature", 0.03}, {"sound", 3.0},    {"tvoc", 30.0},     {"oxygen", 0.002},
      {"humidity", 0.3}, {"humidity_abs", 0.03}, {"co2", 5.0},     {"co", 0.01},       {"so2", 0.05},
      {"no2", 0.3},      {"o3", 0.5},           {"pm2_5", 0.3},    {"pm10", 0.5},      {"pm1", 0.3},
      {"sound_max", 1.0}, {"dewpt", 0.1}};
  const auto it = table.find(channel);
  if (it == table.end()) throw ConfigError("no synthetic channel named '" + channel + "'");
  return it->second;
}

double ScenarioConfig::noise_for(const std::string& channel) const {
  const auto it = noise.find(channel);
  return it == noise.end() ? default_noise(channel) : it->second;
}

void ScenarioConfig::validate() const {
  if (duration < 1) throw ConfigError("scenario.duration must be >= 1");
  if (devices < 1) throw ConfigError("scenario.devices must be >= 1");
  if (schedule.mean_vacancy < 1 || schedule.mean_occupancy < 1 || schedule.mean_window_open < 1)
    throw ConfigError("scenario.schedule mean durations must be >= 1");
  if (schedule.max_persons < 1) throw ConfigError("scenario.schedule.max_persons must be >= 1");
  if (schedule.window_open_probability < 0 || schedule.window_open_probability > 1)
    throw ConfigError("scenario.schedule.window_open_probability must lie in [0, 1]");
  if (schedule.independent_window_rate < 0 || schedule.independent_window_rate > 1)
    throw ConfigError("scenario.schedule.independent_window_rate must lie in [0, 1]");
  const auto rate = [](double v, const char* name) {
    if (!(v > 0.0 && v < 1.0)) throw ConfigError(std::string("scenario.dynamics.") + name + " must lie in (0, 1)");
  };
  rate(dynamics.co2_decay_closed, "co2_decay_closed");
  rate(dynamics.co2_decay_open, "co2_decay_open");
  rate(dynamics.humidity_decay_closed, "humidity_decay_closed");
  rate(dynamics.humidity_decay_open, "humidity_decay_open");
  rate(dynamics.temperature_decay_closed, "temperature_decay_closed");
  rate(dynamics.temperature_decay_open, "temperature_decay_open");
  if (dynamics.drift_persistence < 0 || dynamics.drift_persistence >= 1)
    throw ConfigError("scenario.dynamics.drift_persistence must lie in [0, 1)");
  for (const auto& [name, sd] : noise) {
    default_noise(name);
    if (sd < 0) throw ConfigError("scenario.noise." + name + " must be >= 0");
  }
  if (defects.missing_runs < 0 || defects.gaps < 0 || defects.missing_mean_length < 1 || defects.gap_mean_length < 1)
    throw ConfigError("scenario.defects rates must be >= 0 and mean lengths >= 1");
}

void to_json(nlohmann::json& j, const ScenarioConfig& c) {
  const auto& s = c.schedule;
  const auto& d = c.dynamics;
  j = {{"duration", c.duration},
       {"seed", c.seed},
       {"devices", c.devices},
       {"start_time", c.start_time},
       {"schedule",
        {{"mean_vacancy", s.mean_vacancy},
         {"mean_occupancy", s.mean_occupancy},
         {"max_persons", s.max_persons},
         {"window_open_probability", s.window_open_probability},
         {"mean_window_open", s.mean_window_open},
         {"independent_window_rate", s.independent_window_rate}}},
       {"dynamics",
        {{"co2_ambient", d.co2_ambient},
         {"co2_emission", d.co2_emission},
         {"co2_decay_closed", d.co2_decay_closed},
         {"co2_decay_open", d.co2_decay_open},
         {"o2_ambient", d.o2_ambient},
         {"o2_coupling", d.o2_coupling},
         {"tvoc_ambient", d.tvoc_ambient},
         {"tvoc_coupling", d.tvoc_coupling},
         {"humidity_ambient", d.humidity_ambient},
         {"humidity_emission", d.humidity_emission},
         {"humidity_decay_closed", d.humidity_decay_closed},
         {"humidity_decay_open", d.humidity_decay_open},
         {"temperature_indoor", d.temperature_indoor},
         {"temperature_outdoor", d.temperature_outdoor},
         {"temperature_heat", d.temperature_heat},
         {"temperature_decay_closed", d.temperature_decay_closed},
         {"temperature_decay_open", d.temperature_decay_open},
         {"sound_ambient", d.sound_ambient},
         {"sound_per_person", d.sound_per_person},
         {"drift_persistence", d.drift_persistence},
         {"particulate_drift", d.particulate_drift}}},
       {"noise", c.noise},
       {"defects",
        {{"missing_runs", c.defects.missing_runs},
         {"missing_mean_length", c.defects.missing_mean_length},
         {"gaps", c.defects.gaps},
         {"gap_mean_length", c.defects.gap_mean_length}}}};
}

void from_json(const nlohmann::json& j, ScenarioConfig& c) {
  reject_unknown(j, {"duration", "seed", "devices", "start_time", "schedule", "dynamics", "noise", "defects"}, "scenario");
  c = ScenarioConfig{};
  c.duration = get_or(j, "duration", c.duration);
  c.seed = get_or(j, "seed", c.seed);
  c.devices = get_or(j, "devices", c.devices);
  c.start_time = get_or(j, "start_time", c.start_time);
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    reject_unknown(s,
                   {"mean_vacancy", "mean_occupancy", "max_persons", "window_open_probability", "mean_window_open",
                    "independent_window_rate"},
                   "scenario.schedule");
    auto& o = c.schedule;
    o.mean_vacancy = get_or(s, "mean_vacancy", o.mean_vacancy);
    o.mean_occupancy = get_or(s, "mean_occupancy", o.mean_occupancy);
    o.max_persons = get_or(s, "max_persons", o.max_persons);
    o.window_open_probability = get_or(s, "window_open_probability", o.window_open_probability);
    o.mean_window_open = get_or(s, "mean_window_open", o.mean_window_open);
    o.independent_window_rate = get_or(s, "independent_window_rate", o.independent_window_rate);
  }
  if (j.contains("dynamics")) {
    const auto& s = j.at("dynamics");
    reject_unknown(s,
                   {"co2_ambient", "co2_emission", "co2_decay_closed", "co2_decay_open", "o2_ambient", "o2_coupling",
                    "tvoc_ambient", "tvoc_coupling", "humidity_ambient", "humidity_emission", "humidity_decay_closed",
                    "humidity_decay_open", "temperature_indoor", "temperature_outdoor", "temperature_heat",
                    "temperature_decay_closed", "temperature_decay_open", "sound_ambient", "sound_per_person",
                    "drift_persistence", "particulate_drift"},
                   "scenario.dynamics");
    auto& d = c.dynamics;
    d.co2_ambient = get_or(s, "co2_ambient", d.co2_ambient);
    d.co2_emission = get_or(s, "co2_emission", d.co2_emission);
    d.co2_decay_closed = get_or(s, "co2_decay_closed", d.co2_decay_closed);
    d.co2_decay_open = get_or(s, "co2_decay_open", d.co2_decay_open);
    d.o2_ambient = get_or(s, "o2_ambient", d.o2_ambient);
    d.o2_coupling = get_or(s, "o2_coupling", d.o2_coupling);
    d.tvoc_ambient = get_or(s, "tvoc_ambient", d.tvoc_ambient);
    d.tvoc_coupling = get_or(s, "tvoc_coupling", d.tvoc_coupling);
    d.humidity_ambient = get_or(s, "humidity_ambient", d.humidity_ambient);
    d.humidity_emission = get_or(s, "humidity_emission", d.humidity_emission);
    d.humidity_decay_closed = get_or(s, "humidity_decay_closed", d.humidity_decay_closed);
    d.humidity_decay_open = get_or(s, "humidity_decay_open", d.humidity_decay_open);
    d.temperature_indoor = get_or(s, "temperature_indoor", d.temperature_indoor);
    d.temperature_outdoor = get_or(s, "temperature_outdoor", d.temperature_outdoor);
    d.temperature_heat = get_or(s, "temperature_heat", d.temperature_heat);
    d.temperature_decay_closed = get_or(s, "temperature_decay_closed", d.temperature_decay_closed);
    d.temperature_decay_open = get_or(s, "temperature_decay_open", d.temperature_decay_open);
    d.sound_ambient = get_or(s, "sound_ambient", d.sound_ambient);
    d.sound_per_person = get_or(s, "sound_per_person", d.sound_per_person);
    d.drift_persistence = get_or(s, "drift_persistence", d.drift_persistence);
    d.particulate_drift = get_or(s, "particulate_drift", d.particulate_drift);
  }
  if (j.contains("noise")) c.noise = j.at("noise").get<std::map<std::string, double>>();
  if (j.contains("defects")) {
    const auto& s = j.at("defects");
    reject_unknown(s, {"missing_runs", "missing_mean_length", "gaps", "gap_mean_length"}, "scenario.defects");
    c.defects.missing_runs = get_or(s, "missing_runs", c.defects.missing_runs);
    c.defects.missing_mean_length = get_or(s, "missing_mean_length", c.defects.missing_mean_length);
    c.defects.gaps = get_or(s, "gaps", c.defects.gaps);
    c.defects.gap_mean_length = get_or(s, "gap_mean_length", c.defects.gap_mean_length);
  }
  c.validate();
}

namespace {

// Exponential duration with the given mean, rounded up to whole samples.
std::size_t draw_duration(Rng& rng, double mean) {
  const double u = rng.uniform();
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(-mean * std::log1p(-u))));
}

void make_schedule(const ScenarioConfig& cfg, Rng& rng, std::vector<std::int64_t>& persons,
                   std::vector<std::int64_t>& windows) {
  const auto& s = cfg.schedule;
  const std::size_t n = cfg.duration;
  persons.assign(n, 0);
  windows.assign(n, 0);
  const auto open_window = [&](std::size_t from) {
    const std::size_t len = draw_duration(rng, s.mean_window_open);
    for (std::size_t t = from; t < std::min(n, from + len); ++t) windows[t] = 1;
  };
  std::size_t t = 0;
  bool occupied = false;
  while (t < n) {
    const std::size_t len = draw_duration(rng, occupied ? s.mean_occupancy : s.mean_vacancy);
    const std::size_t end = std::min(n, t + len);
    if (occupied) {
      const auto count = static_cast<std::int64_t>(1 + rng.below(s.max_persons));
      for (std::size_t i = t; i < end; ++i) persons[i] = count;
      if (rng.bernoulli(s.window_open_probability)) open_window(t + rng.below(end - t));
    } else {
      for (std::size_t i = t; i < end; ++i)
        if (windows[i] == 0 && rng.bernoulli(s.independent_window_rate)) open_window(i);
    }
    t = end;
    occupied = !occupied;
  }
}

struct Ambient {
  double co2, humidity, indoor, outdoor, sound;
};

double saturation_humidity(double temperature) {
  const double t = temperature;
  return 5.018 + 0.32321 * t + 8.1847e-3 * t * t + 3.1243e-4 * t * t * t;  // g/m^3
}

double dew_point(double temperature, double relative_humidity) {
  const double rh = std::clamp(relative_humidity, 1.0, 100.0);
  const double g = std::log(rh / 100.0) + 17.62 * temperature / (243.12 + temperature);
  return 243.12 * g / (17.62 - g);
}

SensorFrame run_dynamics(const ScenarioConfig& cfg, const Ambient& amb, Rng& rng,
                         const std::vector<std::int64_t>& persons, const std::vector<std::int64_t>& windows) {
  const auto& d = cfg.dynamics;
  const std::size_t n = persons.size();
  if (windows.size() != n) throw ShapeError("person and window schedules differ in length");

  SensorFrame f;
  f.device_id = "synthetic";
  f.timestamps.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.timestamps[i] = cfg.start_time + static_cast<std::int64_t>(i) * kSamplePeriod;
  std::map<std::string, std::vector<double>> out;
  for (const auto& name : canonical_channels()) out[name].resize(n);

  const auto noise = [&](const char* channel) {
    const double sd = cfg.noise_for(channel);
    return sd > 0.0 ? rng.normal(0.0, sd) : 0.0;
  };
  const char* drifting[] = {"pressure", "co", "so2", "no2", "o3"};
  const double drift_base[] = {1013.0, 0.3, 2.0, 15.0, 30.0};
  double drift[5] = {0, 0, 0, 0, 0};
  double particulate = 0.0;

  double co2 = amb.co2, hum = amb.humidity, temp = amb.indoor;
  for (std::size_t t = 0; t < n; ++t) {
    const double p = static_cast<double>(persons[t]);
    const bool open = windows[t] != 0;

    out["co2"][t] = co2;
    out["temperature"][t] = temp;
    out["humidity_abs"][t] = hum;
    const double excess = co2 - amb.co2;
    out["oxygen"][t] = d.o2_ambient - d.o2_coupling * excess + noise("oxygen");
    out["tvoc"][t] = std::max(0.0, d.tvoc_ambient + d.tvoc_coupling * excess + noise("tvoc"));
    const double rh = std::clamp(100.0 * hum / saturation_humidity(temp), 0.0, 100.0);
    out["humidity"][t] = std::clamp(rh + noise("humidity"), 0.0, 100.0);
    out["dewpt"][t] = dew_point(temp, rh) + noise("dewpt");
    const double sound = std::max(0.0, amb.sound + d.sound_per_person * p + noise("sound"));
    out["sound"][t] = sound;
    out["sound_max"][t] = sound + 6.0 + std::abs(noise("sound_max"));
    out["pm1"][t] = std::max(0.0, 4.0 + 0.6 * particulate + noise("pm1"));
    out["pm2_5"][t] = std::max(0.0, 7.0 + particulate + noise("pm2_5"));
    out["pm10"][t] = std::max(0.0, 11.0 + 1.6 * particulate + noise("pm10"));
    for (int c = 0; c < 5; ++c) out[drifting[c]][t] = std::max(0.0, drift_base[c] + drift[c]);

    // advance the state to t + 1
    const double co2_decay = open ? d.co2_decay_open : d.co2_decay_closed;
    co2 = std::clamp(co2 + d.co2_emission * p - co2_decay * (co2 - amb.co2) + noise("co2"), amb.co2 - 50.0, 5000.0);
    const double hum_decay = open ? d.humidity_decay_open : d.humidity_decay_closed;
    hum = std::clamp(hum + d.humidity_emission * p - hum_decay * (hum - amb.humidity) + noise("humidity_abs"), 0.5, 30.0);
    const double target = open ? amb.outdoor : amb.indoor;
    const double temp_decay = open ? d.temperature_decay_open : d.temperature_decay_closed;
    temp = std::clamp(temp + d.temperature_heat * p - temp_decay * (temp - target) + noise("temperature"), -20.0, 45.0);
    for (int c = 0; c < 5; ++c) drift[c] = d.drift_persistence * drift[c] + noise(drifting[c]);
    if (d.particulate_drift > 0.0)
      particulate = std::max(-4.0, d.drift_persistence * particulate + rng.normal(0.0, d.particulate_drift));
  }

  for (const auto& name : canonical_channels()) f.channels.push_back({name, std::move(out[name])});
  f.labels.push_back({std::string(kPersonLabel), persons});
  f.labels.push_back({std::string(kWindowLabel), windows});
  return f;
}

SensorFrame inject_defects(const ScenarioConfig& cfg, SensorFrame f, Rng& rng) {
  const auto& d = cfg.defects;
  const std::size_t n = f.rows();
  if (d.missing_runs > 0.0)
    for (auto& c : f.channels)
      for (std::size_t t = 0; t < n; ++t)
        if (rng.bernoulli(d.missing_runs / 1000.0)) {
          const std::size_t len = draw_duration(rng, d.missing_mean_length);
          for (std::size_t i = t; i < std::min(n, t + len); ++i) c.values[i] = kMissing;
          t += len;
        }
  if (d.gaps > 0.0) {
    std::vector<bool> keep(n, true);
    for (std::size_t t = 1; t < n; ++t)
      if (rng.bernoulli(d.gaps / 1000.0)) {
        const std::size_t len = draw_duration(rng, d.gap_mean_length);
        for (std::size_t i = t; i < std::min(n - 1, t + len); ++i) keep[i] = false;
        t += len;
      }
    SensorFrame g;
    g.device_id = f.device_id;
    for (const auto& c : f.channels) g.channels.push_back({c.name, {}});
    for (const auto& l : f.labels) g.labels.push_back({l.name, {}});
    for (std::size_t t = 0; t < n; ++t) {
      if (!keep[t]) continue;
      g.timestamps.push_back(f.timestamps[t]);
      for (std::size_t c = 0; c < f.channels.size(); ++c) g.channels[c].values.push_back(f.channels[c].values[t]);
      for (std::size_t l = 0; l < f.labels.size(); ++l) g.labels[l].values.push_back(f.labels[l].values[t]);
    }
    f = std::move(g);
  }
  return f;
}

Ambient base_ambient(const ScenarioConfig& cfg) {
  const auto& d = cfg.dynamics;
  return {d.co2_ambient, d.humidity_ambient, d.temperature_indoor, d.temperature_outdoor, d.sound_ambient};
}

SensorFrame generate_device(const ScenarioConfig& cfg, std::uint64_t seed, bool jitter) {
  Rng rng(seed);
  Ambient amb = base_ambient(cfg);
  if (jitter) {
    amb.co2 += rng.uniform(-30.0, 30.0);
    amb.humidity += rng.uniform(-1.0, 1.0);
    amb.indoor += rng.uniform(-1.0, 1.0);
    amb.outdoor += rng.uniform(-3.0, 3.0);
    amb.sound += rng.uniform(-3.0, 3.0);
  }
  std::vector<std::int64_t> persons, windows;
  make_schedule(cfg, rng, persons, windows);
  return inject_defects(cfg, run_dynamics(cfg, amb, rng, persons, windows), rng);
}

}  // namespace

SensorFrame generate_frame(const ScenarioConfig& cfg) {
  cfg.validate();
  return generate_device(cfg, cfg.seed, false);
}

SensorFrame simulate(const ScenarioConfig& cfg, const std::vector<std::int64_t>& persons,
                     const std::vector<std::int64_t>& windows) {
  cfg.validate();
  Rng rng(cfg.seed);
  return run_dynamics(cfg, base_ambient(cfg), rng, persons, windows);
}

std::vector<SensorFrame> generate_fleet(const ScenarioConfig& cfg, std::size_t devices) {
  cfg.validate();
  if (devices < 1) throw ConfigError("fleet needs at least one device");
  std::vector<SensorFrame> fleet;
  for (std::size_t i = 0; i < devices; ++i) {
    SensorFrame f = generate_device(cfg, derive_seed(cfg.seed, i), true).without_labels();
    char id[32];
    std::snprintf(id, sizeof id, "device-%04zu", i);
    f.device_id = id;
    fleet.push_back(std::move(f));
  }
  return fleet;
}

}  // namespace roomsense
