#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tke/ingest.hpp"
#include "tke/turbulence.hpp"

namespace tke {

inline constexpr std::size_t kFeatureCount = 8;

// Predictor column names in matrix order, then the target name.
const std::array<std::string, kFeatureCount>& feature_names();
inline constexpr std::string_view kTargetName = "TKE_MA";

enum class Split { train, test, val };
std::string_view to_string(Split s);

struct FeatureTable {
  Eigen::MatrixXd X;  // N x 8: T1..T7, sonic_T
  Eigen::VectorXd y;  // tke_ma
  std::vector<double> time_s;
  std::vector<Split> split;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  std::vector<std::size_t> rows_in(Split s) const;
};

FeatureTable assemble(const ClusterDataset& ds, const TurbulenceSeries& turb);

struct ScalerState {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;  // population standard deviation
};

// Fits on the listed rows only.
ScalerState fit_scaler(const Eigen::MatrixXd& X, std::span<const std::size_t> rows);
ScalerState fit_scaler(const Eigen::MatrixXd& X);
Eigen::MatrixXd transform(const Eigen::MatrixXd& X, const ScalerState& s);
Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& Z, const ScalerState& s);

struct SplitRatios {
  double train = 0.64;
  double test = 0.16;
  double val = 0.20;

  void validate() const;
};

enum class SplitMode { shuffle, chronological };
std::string_view to_string(SplitMode m);
SplitMode split_mode_from_string(std::string_view s);

// Shuffle mode: permute rows by seed, give the first val share of the
// permutation to val, then divide the remainder train:test. Chronological mode
// assigns train, test, val in time order with the same counts.
FeatureTable split(const FeatureTable& table, std::uint64_t seed, const SplitRatios& ratios = {},
                   SplitMode mode = SplitMode::shuffle);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

// k independent random partitions of `rows` with round(train_frac * n) rows on
// the training side.
std::vector<Fold> shuffle_split_cv(std::span<const std::size_t> rows, std::size_t k, double train_frac,
                                   std::uint64_t seed);

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& X, std::span<const std::size_t> rows);
Eigen::VectorXd select_rows(const Eigen::VectorXd& y, std::span<const std::size_t> rows);

void write_features_csv(const std::filesystem::path& path, const FeatureTable& table);

}  // namespace tke
