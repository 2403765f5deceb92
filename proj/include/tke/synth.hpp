#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "tke/ingest.hpp"

namespace tke {

struct BackgroundWind {
  double u_mean_ms = 2.0;
  double v_mean_ms = 0.5;
  double w_mean_ms = 0.0;
  double drift_ms_per_s = 0.0;  // linear trend on u, centred on the record midpoint
};

struct SynthConfig {
  std::size_t n_samples = 5000;
  std::uint64_t seed = 42;
  double fire_front_time_s = -1.0;  // negative: 30% into the record
  double plume_gain = 3.0;          // puff amplitude per unit driver, m/s
  double noise_sd = 0.05;           // base turbulence, m/s
  BackgroundWind trend;

  double ambient_C = 20.0;
  double pulse_amplitude_C = 25.0;  // T1 rise at full driver
  double attenuation_cm = 40.0;     // e-folding height of the temperature rise
  double lag_s_per_cm = 0.05;
  double rise_s = 5.0;
  double decay_s = 60.0;
  double puff_hz = 1.0;
  double sensor_noise_C = 0.3;
  std::string name = "SYN";

  void validate() const;
};

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthConfig& cfg);

struct SynthResult {
  ClusterDataset dataset;
  std::vector<double> driver;      // plume driver in [0, 1], per record
  std::vector<double> tke_signal;  // plume_gain^2 * driver^2 / 2, the coherent TKE
  PhaseSegmentation segmentation;  // spans the whole record
};

// 10 Hz records in which a logistic-rise, exponential-decay plume driver heats
// T1..T7 with height-dependent attenuation and lag, and drives coherent wind
// puffs (amplitude plume_gain * driver) plus AR(1) turbulence whose scale is
// noise_sd * (1 + plume_gain * driver).
SynthResult generate(const SynthConfig& cfg);

// <dir>/<name>.csv, <dir>/truth.csv and <dir>/segmentation.json.
void write_synthetic(const std::filesystem::path& dir, const SynthResult& result);

// Plume driver at time t for the configured pulse shape.
double plume_driver(const SynthConfig& cfg, double t_s);

}  // namespace tke
