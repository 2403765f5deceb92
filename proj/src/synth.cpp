#include "tke/synth.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "tke/error.hpp"
#include "tke/parallel.hpp"

namespace tke {

namespace {

constexpr double kArCoefficient = 0.9;

double front_time(const SynthConfig& cfg) {
  return cfg.fire_front_time_s >= 0 ? cfg.fire_front_time_s : 0.3 * static_cast<double>(cfg.n_samples) * kSamplePeriodS;
}

// Unit-variance AR(1) stream.
class ArNoise {
 public:
  explicit ArNoise(std::uint64_t seed) : rng_(seed) { state_ = normal_(rng_); }
  double next() {
    state_ = kArCoefficient * state_ + std::sqrt(1.0 - kArCoefficient * kArCoefficient) * normal_(rng_);
    return state_;
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  double state_ = 0.0;
};

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::parameter, "synth: " + what); };
  if (n_samples < 100) fail("n_samples must be >= 100");
  if (!(noise_sd >= 0) || !std::isfinite(noise_sd)) fail("noise_sd must be >= 0");
  if (!std::isfinite(plume_gain) || plume_gain < 0) fail("plume_gain must be >= 0");
  if (!(rise_s > 0 && decay_s > 0 && attenuation_cm > 0)) fail("rise_s, decay_s and attenuation_cm must be > 0");
  if (!(sensor_noise_C >= 0 && lag_s_per_cm >= 0 && puff_hz >= 0)) fail("sensor noise, lag and puff frequency must be >= 0");
  if (name.empty()) fail("name must be non-empty");
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  if (!j.is_object()) throw Error(ErrorCode::parameter, "synth config must be an object");
  static const std::set<std::string> known{"n_samples",     "seed",       "fire_front_time_s", "plume_gain",
                                           "noise_sd",      "trend",      "ambient_C",         "pulse_amplitude_C",
                                           "attenuation_cm", "lag_s_per_cm", "rise_s",          "decay_s",
                                           "puff_hz",       "sensor_noise_C", "name"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw Error(ErrorCode::parameter, "synth config: unknown key '" + key + "'");
  }
  try {
    c.n_samples = j.value("n_samples", c.n_samples);
    c.seed = j.value("seed", c.seed);
    c.fire_front_time_s = j.value("fire_front_time_s", c.fire_front_time_s);
    c.plume_gain = j.value("plume_gain", c.plume_gain);
    c.noise_sd = j.value("noise_sd", c.noise_sd);
    if (j.contains("trend")) {
      const auto& t = j.at("trend");
      c.trend.u_mean_ms = t.value("u_mean_ms", c.trend.u_mean_ms);
      c.trend.v_mean_ms = t.value("v_mean_ms", c.trend.v_mean_ms);
      c.trend.w_mean_ms = t.value("w_mean_ms", c.trend.w_mean_ms);
      c.trend.drift_ms_per_s = t.value("drift_ms_per_s", c.trend.drift_ms_per_s);
    }
    c.ambient_C = j.value("ambient_C", c.ambient_C);
    c.pulse_amplitude_C = j.value("pulse_amplitude_C", c.pulse_amplitude_C);
    c.attenuation_cm = j.value("attenuation_cm", c.attenuation_cm);
    c.lag_s_per_cm = j.value("lag_s_per_cm", c.lag_s_per_cm);
    c.rise_s = j.value("rise_s", c.rise_s);
    c.decay_s = j.value("decay_s", c.decay_s);
    c.puff_hz = j.value("puff_hz", c.puff_hz);
    c.sensor_noise_C = j.value("sensor_noise_C", c.sensor_noise_C);
    c.name = j.value("name", c.name);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parameter, std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const SynthConfig& c) {
  return {{"n_samples", c.n_samples},
          {"seed", c.seed},
          {"fire_front_time_s", c.fire_front_time_s},
          {"plume_gain", c.plume_gain},
          {"noise_sd", c.noise_sd},
          {"trend",
           {{"u_mean_ms", c.trend.u_mean_ms},
            {"v_mean_ms", c.trend.v_mean_ms},
            {"w_mean_ms", c.trend.w_mean_ms},
            {"drift_ms_per_s", c.trend.drift_ms_per_s}}},
          {"ambient_C", c.ambient_C},
          {"pulse_amplitude_C", c.pulse_amplitude_C},
          {"attenuation_cm", c.attenuation_cm},
          {"lag_s_per_cm", c.lag_s_per_cm},
          {"rise_s", c.rise_s},
          {"decay_s", c.decay_s},
          {"puff_hz", c.puff_hz},
          {"sensor_noise_C", c.sensor_noise_C},
          {"name", c.name}};
}

double plume_driver(const SynthConfig& cfg, double t_s) {
  const double dt = t_s - front_time(cfg);
  const double rise = 1.0 / (1.0 + std::exp(-dt / cfg.rise_s));
  const double decay = dt > 0 ? std::exp(-dt / cfg.decay_s) : 1.0;
  return rise * decay;
}

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_samples;
  SynthResult out;
  out.dataset.name = cfg.name;
  out.dataset.records.resize(n);
  out.driver.resize(n);
  out.tke_signal.resize(n);

  // Independent streams per quantity so changing one knob leaves the others'
  // noise untouched.
  ArNoise eu(derive_seed(cfg.seed, 0)), ev(derive_seed(cfg.seed, 1)), ew(derive_seed(cfg.seed, 2));
  std::vector<ArNoise> sensor;
  for (std::size_t k = 0; k <= kThermocoupleCount; ++k) sensor.emplace_back(derive_seed(cfg.seed, 10 + k));

  const double t_mid = 0.5 * static_cast<double>(n - 1) * kSamplePeriodS;
  const double g = cfg.plume_gain;
  for (std::size_t i = 0; i < n; ++i) {
    // Integer-based timestamps keep the cadence exact.
    const double t = static_cast<double>(i) / 10.0;
    const double d = plume_driver(cfg, t);
    out.driver[i] = d;
    out.tke_signal[i] = 0.5 * g * g * d * d;

    SampleRecord& r = out.dataset.records[i];
    r.time_s = t;
    const double phase = 2.0 * std::numbers::pi * cfg.puff_hz * t;
    const double sigma = cfg.noise_sd * (1.0 + g * d);
    r.u_ms = cfg.trend.u_mean_ms + cfg.trend.drift_ms_per_s * (t - t_mid) + g * d * std::cos(phase) + sigma * eu.next();
    r.v_ms = cfg.trend.v_mean_ms + sigma * ev.next();
    r.w_ms = cfg.trend.w_mean_ms + g * d * std::sin(phase) + sigma * ew.next();
    for (std::size_t k = 0; k < kThermocoupleCount; ++k) {
      const double h = kThermocoupleHeightsCm[k];
      const double rise = cfg.pulse_amplitude_C * std::exp(-h / cfg.attenuation_cm);
      r.T_C[k] = cfg.ambient_C + rise * plume_driver(cfg, t - cfg.lag_s_per_cm * h) + cfg.sensor_noise_C * sensor[k].next();
    }
    // The anemometer sits above the thermocouple mast.
    const double sonic_h = 150.0;
    r.sonic_T_C = cfg.ambient_C + cfg.pulse_amplitude_C * std::exp(-sonic_h / cfg.attenuation_cm) *
                                      plume_driver(cfg, t - cfg.lag_s_per_cm * sonic_h) +
                  cfg.sensor_noise_C * sensor[kThermocoupleCount].next();
  }
  out.dataset.provenance.push_back({cfg.name + ".csv", n});
  out.segmentation = {0.0, static_cast<double>(n - 1) / 10.0};
  return out;
}

void write_synthetic(const std::filesystem::path& dir, const SynthResult& result) {
  std::filesystem::create_directories(dir);
  write_csv(dir / (result.dataset.name + ".csv"), result.dataset);
  std::ofstream truth(dir / "truth.csv");
  if (!truth) throw Error(ErrorCode::io, "cannot write " + (dir / "truth.csv").string());
  truth << "time_s,driver,tke_signal\n";
  char buf[96];
  for (std::size_t i = 0; i < result.driver.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", result.dataset.records[i].time_s, result.driver[i],
                  result.tke_signal[i]);
    truth << buf;
  }
  std::ofstream seg(dir / "segmentation.json");
  if (!seg) throw Error(ErrorCode::io, "cannot write segmentation.json");
  seg << nlohmann::json{{"burn_start_s", result.segmentation.burn_start_s},
                        {"burn_end_s", result.segmentation.burn_end_s}}
             .dump(2)
      << '\n';
}

}  // namespace tke
