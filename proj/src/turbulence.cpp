#include "tke/turbulence.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

#include "tke/error.hpp"

namespace tke {

namespace {

// [begin, end) record ranges, one per source segment.
std::vector<std::pair<std::size_t, std::size_t>> segment_ranges(const ClusterDataset& ds) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::size_t begin = 0;
  for (const auto& seg : ds.provenance) {
    if (seg.count == 0) continue;
    ranges.emplace_back(begin, begin + seg.count);
    begin += seg.count;
  }
  if (begin != ds.size()) ranges = {{0, ds.size()}};
  return ranges;
}

void require_non_empty(std::size_t n, const char* what) {
  if (n == 0) throw Error(ErrorCode::empty_input, std::string(what) + ": empty input");
}

}  // namespace

WindFluctuation compute_fluctuations(const ClusterDataset& ds) {
  require_non_empty(ds.size(), "compute_fluctuations");
  WindFluctuation fl;
  fl.u_p.resize(ds.size());
  fl.v_p.resize(ds.size());
  fl.w_p.resize(ds.size());
  for (const auto& [begin, end] : segment_ranges(ds)) {
    double su = 0, sv = 0, sw = 0;
    for (std::size_t i = begin; i < end; ++i) {
      su += ds.records[i].u_ms;
      sv += ds.records[i].v_ms;
      sw += ds.records[i].w_ms;
    }
    const double n = static_cast<double>(end - begin);
    const double mu = su / n, mv = sv / n, mw = sw / n;
    for (std::size_t i = begin; i < end; ++i) {
      fl.u_p[i] = ds.records[i].u_ms - mu;
      fl.v_p[i] = ds.records[i].v_ms - mv;
      fl.w_p[i] = ds.records[i].w_ms - mw;
    }
  }
  return fl;
}

WindFluctuation compute_fluctuations_rolling(const ClusterDataset& ds, std::size_t window) {
  require_non_empty(ds.size(), "compute_fluctuations_rolling");
  if (window == 0) throw Error(ErrorCode::parameter, "rolling window must be >= 1");
  WindFluctuation fl;
  fl.u_p.resize(ds.size());
  fl.v_p.resize(ds.size());
  fl.w_p.resize(ds.size());
  std::vector<double> u(ds.size()), v(ds.size()), w(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    u[i] = ds.records[i].u_ms;
    v[i] = ds.records[i].v_ms;
    w[i] = ds.records[i].w_ms;
  }
  for (const auto& [begin, end] : segment_ranges(ds)) {
    const std::span<const double> su(u.data() + begin, end - begin), sv(v.data() + begin, end - begin),
        sw(w.data() + begin, end - begin);
    const auto mu = moving_average(su, window), mv = moving_average(sv, window), mw = moving_average(sw, window);
    for (std::size_t i = begin; i < end; ++i) {
      fl.u_p[i] = u[i] - mu[i - begin];
      fl.v_p[i] = v[i] - mv[i - begin];
      fl.w_p[i] = w[i] - mw[i - begin];
    }
  }
  return fl;
}

TurbulenceSeries compute_tke(const WindFluctuation& fl) {
  require_non_empty(fl.size(), "compute_tke");
  if (fl.v_p.size() != fl.size() || fl.w_p.size() != fl.size()) {
    throw Error(ErrorCode::shape, "compute_tke: fluctuation components differ in length");
  }
  TurbulenceSeries out;
  out.tke.resize(fl.size());
  for (std::size_t i = 0; i < fl.size(); ++i) {
    out.tke[i] = 0.5 * (fl.u_p[i] * fl.u_p[i] + fl.v_p[i] * fl.v_p[i] + fl.w_p[i] * fl.w_p[i]);
  }
  return out;
}

std::vector<double> moving_average(std::span<const double> x, std::size_t window) {
  if (window == 0) throw Error(ErrorCode::parameter, "moving average window must be >= 1");
  require_non_empty(x.size(), "moving_average");
  std::vector<double> out(x.size());
  // Direct window sums: a running sum drifts and can push a constant series
  // off its value.
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t first = i + 1 >= window ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = first; j <= i; ++j) sum += x[j];
    out[i] = sum / static_cast<double>(i - first + 1);
  }
  return out;
}

TurbulenceSeries compute_turbulence(const ClusterDataset& ds, const TurbulenceOptions& options) {
  const WindFluctuation fl = options.mode == FluctuationMode::segment_mean
                                 ? compute_fluctuations(ds)
                                 : compute_fluctuations_rolling(ds, options.rolling_window);
  TurbulenceSeries out = compute_tke(fl);
  out.time_s.resize(ds.size());
  out.tke_ma.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out.time_s[i] = ds.records[i].time_s;
  for (const auto& [begin, end] : segment_ranges(ds)) {
    const auto ma = moving_average(std::span<const double>(out.tke.data() + begin, end - begin), options.ma_window);
    std::copy(ma.begin(), ma.end(), out.tke_ma.begin() + static_cast<std::ptrdiff_t>(begin));
  }
  return out;
}

void write_augmented_csv(std::ostream& out, const ClusterDataset& ds, const TurbulenceSeries& turb) {
  if (turb.size() != ds.size()) throw Error(ErrorCode::alignment, "turbulence series length differs from dataset");
  for (const auto& c : csv_columns()) out << c << ',';
  out << "tke,tke_ma\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds.records[i];
    for (double v : {r.time_s, r.u_ms, r.v_ms, r.w_ms, r.sonic_T_C}) {
      put(v);
      out << ',';
    }
    for (double t : r.T_C) {
      put(t);
      out << ',';
    }
    put(turb.tke[i]);
    out << ',';
    put(turb.tke_ma[i]);
    out << '\n';
  }
}

void write_augmented_csv(const std::filesystem::path& path, const ClusterDataset& ds, const TurbulenceSeries& turb) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  write_augmented_csv(out, ds, turb);
}

void SonicTempParams::validate() const {
  if (!(gamma > 0 && R_gas > 0 && molar_mass > 0)) {
    throw Error(ErrorCode::parameter, "sonic temperature parameters must be strictly positive");
  }
}

double sonic_speed_to_temperature(double c_ms, const SonicTempParams& p) {
  p.validate();
  if (!(c_ms > 0) || !std::isfinite(c_ms)) throw Error(ErrorCode::domain, "speed of sound must be positive");
  return c_ms * c_ms * p.molar_mass / (p.gamma * p.R_gas);
}

double temperature_to_sonic_speed(double T_K, const SonicTempParams& p) {
  p.validate();
  if (!(T_K > 0) || !std::isfinite(T_K)) throw Error(ErrorCode::domain, "absolute temperature must be positive");
  return std::sqrt(p.gamma * p.R_gas * T_K / p.molar_mass);
}

}  // namespace tke
