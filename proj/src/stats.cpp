#include "tke/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>

#include "tke/error.hpp"

namespace tke {

namespace {

void require_same_length(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::shape, std::string(what) + ": length mismatch (" + std::to_string(x.size()) + " vs " +
                                      std::to_string(y.size()) + ")");
  }
}

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

bool has_ties(std::span<const double> x) {
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y, "pearson");
  if (x.size() < 2) throw Error(ErrorCode::insufficient_data, "pearson needs at least 2 points");
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::degenerate_variance, "pearson: constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y, "spearman");
  if (x.size() < 2) throw Error(ErrorCode::insufficient_data, "spearman needs at least 2 points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  if (has_ties(x) || has_ties(y)) return pearson(rx, ry);
  const double n = static_cast<double>(x.size());
  double d2 = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

CorrelationResult correlate(std::span<const double> x, std::span<const double> y) {
  return {pearson(x, y), spearman(x, y), x.size()};
}

double r_squared(std::span<const double> y, std::span<const double> y_hat) {
  require_same_length(y, y_hat, "r_squared");
  if (y.size() < 2) throw Error(ErrorCode::insufficient_data, "r_squared needs at least 2 points");
  const double my = mean_of(y);
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    ss_tot += (y[i] - my) * (y[i] - my);
  }
  if (ss_tot == 0.0) throw Error(ErrorCode::degenerate_variance, "r_squared: constant targets");
  return 1.0 - ss_res / ss_tot;
}

double mse(std::span<const double> y, std::span<const double> y_hat) {
  require_same_length(y, y_hat, "mse");
  if (y.empty()) throw Error(ErrorCode::insufficient_data, "mse needs at least 1 point");
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
  return s / static_cast<double>(y.size());
}

double mae(std::span<const double> y, std::span<const double> y_hat) {
  require_same_length(y, y_hat, "mae");
  if (y.empty()) throw Error(ErrorCode::insufficient_data, "mae needs at least 1 point");
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - y_hat[i]);
  return s / static_cast<double>(y.size());
}

MetricsReport evaluate(std::span<const double> y, std::span<const double> y_hat) {
  return {r_squared(y, y_hat), mse(y, y_hat), mae(y, y_hat), y.size()};
}

double silverman_bandwidth(std::span<const double> x) {
  if (x.size() < 2) throw Error(ErrorCode::insufficient_data, "bandwidth needs at least 2 points");
  const double m = mean_of(x);
  double ss = 0;
  for (double v : x) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / static_cast<double>(x.size() - 1));
  if (sd == 0.0) throw Error(ErrorCode::degenerate_variance, "bandwidth: all samples identical");
  return 1.06 * sd * std::pow(static_cast<double>(x.size()), -0.2);
}

double kde_density(std::span<const double> samples, double bandwidth, double x) {
  const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
  double sum = 0;
  for (double s : samples) {
    const double z = (x - s) / bandwidth;
    sum += std::exp(-0.5 * z * z);
  }
  return norm * sum;
}

KdeCurve kde(std::span<const double> residuals, std::optional<double> bandwidth, std::size_t min_points) {
  if (residuals.size() < 2) throw Error(ErrorCode::insufficient_data, "kde needs at least 2 residuals");
  if (bandwidth && !(*bandwidth > 0)) throw Error(ErrorCode::parameter, "kde bandwidth must be positive");
  KdeCurve curve;
  curve.bandwidth = bandwidth ? *bandwidth : silverman_bandwidth(residuals);
  const double h = curve.bandwidth;
  const auto [lo_it, hi_it] = std::minmax_element(residuals.begin(), residuals.end());
  const double lo = *lo_it - 5.0 * h, hi = *hi_it + 5.0 * h;
  const auto by_step = static_cast<std::size_t>(std::ceil((hi - lo) / (0.25 * h))) + 1;
  const std::size_t points = std::clamp<std::size_t>(by_step, std::max<std::size_t>(min_points, 2), 200000);
  curve.grid.resize(points);
  curve.density.resize(points);

  std::vector<double> sorted(residuals.begin(), residuals.end());
  std::sort(sorted.begin(), sorted.end());
  const double norm = 1.0 / (static_cast<double>(sorted.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  const double cutoff = 40.0 * h;  // exp(-800) underflows to zero
  for (std::size_t g = 0; g < points; ++g) {
    const double x = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(points - 1);
    curve.grid[g] = x;
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), x - cutoff);
    const auto last = std::upper_bound(first, sorted.end(), x + cutoff);
    double sum = 0;
    for (auto it = first; it != last; ++it) {
      const double z = (x - *it) / h;
      sum += std::exp(-0.5 * z * z);
    }
    curve.density[g] = norm * sum;
  }
  return curve;
}

double trapezoid(std::span<const double> x, std::span<const double> fx) {
  require_same_length(x, fx, "trapezoid");
  double total = 0;
  for (std::size_t i = 1; i < x.size(); ++i) total += 0.5 * (fx[i] + fx[i - 1]) * (x[i] - x[i - 1]);
  return total;
}

CorrelationMatrices correlation_matrix(const std::vector<std::vector<double>>& columns,
                                       const std::vector<std::string>& names) {
  if (columns.size() != names.size()) throw Error(ErrorCode::shape, "correlation_matrix: names/columns mismatch");
  const std::size_t k = columns.size();
  for (std::size_t c = 0; c < k; ++c) {
    if (columns[c].size() != columns.front().size()) {
      throw Error(ErrorCode::shape, "correlation_matrix: column " + names[c] + " has a different length");
    }
    const auto [lo, hi] = std::minmax_element(columns[c].begin(), columns[c].end());
    if (columns[c].size() < 2 || *lo == *hi) {
      throw Error(ErrorCode::degenerate_variance, "correlation_matrix: column " + names[c] + " is constant");
    }
  }
  CorrelationMatrices out{names, Eigen::MatrixXd::Identity(k, k), Eigen::MatrixXd::Identity(k, k)};
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      const double p = pearson(columns[a], columns[b]);
      const double s = spearman(columns[a], columns[b]);
      out.pearson(a, b) = out.pearson(b, a) = p;
      out.spearman(a, b) = out.spearman(b, a) = s;
    }
  }
  return out;
}

void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                      const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << "variable";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << names[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << fmt(m(r, c));
    out << '\n';
  }
}

void write_kde_csv(const std::filesystem::path& path, const KdeCurve& curve) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << "residual,density\n";
  for (std::size_t i = 0; i < curve.grid.size(); ++i) out << fmt(curve.grid[i]) << ',' << fmt(curve.density[i]) << '\n';
}

}  // namespace tke
