#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tke {

double pearson(std::span<const double> x, std::span<const double> y);

// 1-based average ranks; tied values share the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> x);

// Uses 1 - 6 sum d^2 / (N (N^2 - 1)) when neither series has ties, otherwise
// the Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

struct CorrelationResult {
  double pearson_r = 0.0;
  double spearman_rho = 0.0;
  std::size_t n = 0;
};

CorrelationResult correlate(std::span<const double> x, std::span<const double> y);

double r_squared(std::span<const double> y, std::span<const double> y_hat);
double mse(std::span<const double> y, std::span<const double> y_hat);
double mae(std::span<const double> y, std::span<const double> y_hat);

struct MetricsReport {
  double r2 = 0.0;
  double mse = 0.0;
  double mae = 0.0;
  std::size_t n = 0;
};

MetricsReport evaluate(std::span<const double> y, std::span<const double> y_hat);

struct KdeCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

// 1.06 * sample standard deviation * N^(-1/5).
double silverman_bandwidth(std::span<const double> x);

// Gaussian density estimate f(x) = 1/(N h) sum phi((x - x_i) / h).
double kde_density(std::span<const double> samples, double bandwidth, double x);

// Evaluates the estimate on an even grid spanning [min - 5h, max + 5h] with at
// least `min_points` points and a step no wider than h / 4.
KdeCurve kde(std::span<const double> residuals, std::optional<double> bandwidth = std::nullopt,
             std::size_t min_points = 512);

double trapezoid(std::span<const double> x, std::span<const double> fx);

struct CorrelationMatrices {
  std::vector<std::string> names;
  Eigen::MatrixXd pearson;
  Eigen::MatrixXd spearman;
};

CorrelationMatrices correlation_matrix(const std::vector<std::vector<double>>& columns,
                                       const std::vector<std::string>& names);

// Square matrix with a header row and a leading name column.
void write_matrix_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                      const Eigen::MatrixXd& m);
void write_kde_csv(const std::filesystem::path& path, const KdeCurve& curve);

}  // namespace tke
