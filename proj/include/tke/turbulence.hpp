#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "tke/ingest.hpp"

namespace tke {

// Per-sample deviations of the wind components from their means, m/s.
struct WindFluctuation {
  std::vector<double> u_p;
  std::vector<double> v_p;
  std::vector<double> w_p;

  std::size_t size() const { return u_p.size(); }
};

struct TurbulenceSeries {
  std::vector<double> time_s;
  std::vector<double> tke;     // m^2/s^2
  std::vector<double> tke_ma;  // trailing moving average of tke

  std::size_t size() const { return tke.size(); }
};

enum class FluctuationMode {
  segment_mean,  // subtract the mean over each source segment
  rolling_mean,  // subtract a trailing rolling mean
};

struct TurbulenceOptions {
  std::size_t ma_window = 10;
  FluctuationMode mode = FluctuationMode::segment_mean;
  std::size_t rolling_window = 600;
};

WindFluctuation compute_fluctuations(const ClusterDataset& ds);
WindFluctuation compute_fluctuations_rolling(const ClusterDataset& ds, std::size_t window);

// tke[i] = (u_p^2 + v_p^2 + w_p^2) / 2. The returned series carries no
// timestamps or moving average.
TurbulenceSeries compute_tke(const WindFluctuation& fl);

// Trailing mean over `window` points; the first window-1 outputs average the
// points seen so far, so the output length matches the input.
std::vector<double> moving_average(std::span<const double> x, std::size_t window);

// Full chain: fluctuations, tke and tke_ma, aligned to ds timestamps. Merged
// datasets are processed per source segment.
TurbulenceSeries compute_turbulence(const ClusterDataset& ds, const TurbulenceOptions& options = {});

void write_augmented_csv(std::ostream& out, const ClusterDataset& ds, const TurbulenceSeries& turb);
void write_augmented_csv(const std::filesystem::path& path, const ClusterDataset& ds, const TurbulenceSeries& turb);

struct SonicTempParams {
  double gamma = 1.4;
  double R_gas = 8.314462618;  // J/(mol K)
  double molar_mass = 0.0289645;  // kg/mol, dry air

  void validate() const;
};

// Inverts c = sqrt(gamma R T / M): T = c^2 M / (gamma R), Kelvin.
double sonic_speed_to_temperature(double c_ms, const SonicTempParams& p = {});
double temperature_to_sonic_speed(double T_K, const SonicTempParams& p = {});

inline constexpr double kKelvinOffset = 273.15;

}  // namespace tke
