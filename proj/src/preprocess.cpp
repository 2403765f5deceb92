#include "tke/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "tke/error.hpp"

namespace tke {

const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names{"T1", "T2", "T3", "T4", "T5", "T6", "T7", "sonic_T"};
  return names;
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::val: return "val";
  }
  return "unknown";
}

std::string_view to_string(SplitMode m) { return m == SplitMode::shuffle ? "shuffle" : "chronological"; }

SplitMode split_mode_from_string(std::string_view s) {
  if (s == "shuffle") return SplitMode::shuffle;
  if (s == "chronological") return SplitMode::chronological;
  throw Error(ErrorCode::parameter, "unknown split mode '" + std::string(s) + "'");
}

std::vector<std::size_t> FeatureTable::rows_in(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s) out.push_back(i);
  }
  return out;
}

FeatureTable assemble(const ClusterDataset& ds, const TurbulenceSeries& turb) {
  if (ds.size() != turb.size() || turb.tke_ma.size() != ds.size()) {
    throw Error(ErrorCode::alignment, ds.name + ": " + std::to_string(ds.size()) + " records but " +
                                          std::to_string(turb.tke_ma.size()) + " turbulence samples");
  }
  if (turb.time_s.size() != ds.size()) throw Error(ErrorCode::alignment, ds.name + ": turbulence series lacks timestamps");
  const auto n = static_cast<Eigen::Index>(ds.size());
  FeatureTable t;
  t.X.resize(n, kFeatureCount);
  t.y.resize(n);
  t.time_s.resize(ds.size());
  t.split.assign(ds.size(), Split::train);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = ds.records[static_cast<std::size_t>(i)];
    if (std::abs(r.time_s - turb.time_s[static_cast<std::size_t>(i)]) > kCadenceToleranceS) {
      throw Error(ErrorCode::alignment, ds.name + ": timestamp mismatch at row " + std::to_string(i));
    }
    for (std::size_t c = 0; c < kThermocoupleCount; ++c) t.X(i, static_cast<Eigen::Index>(c)) = r.T_C[c];
    t.X(i, 7) = r.sonic_T_C;
    t.y(i) = turb.tke_ma[static_cast<std::size_t>(i)];
    t.time_s[static_cast<std::size_t>(i)] = r.time_s;
  }
  if (!t.X.allFinite() || !t.y.allFinite()) throw Error(ErrorCode::parse, ds.name + ": non-finite feature values");
  return t;
}

ScalerState fit_scaler(const Eigen::MatrixXd& X, std::span<const std::size_t> rows) {
  if (rows.size() < 2) throw Error(ErrorCode::insufficient_data, "scaler needs at least 2 training rows");
  ScalerState s;
  s.mean = Eigen::VectorXd::Zero(X.cols());
  s.std = Eigen::VectorXd::Zero(X.cols());
  const double n = static_cast<double>(rows.size());
  for (std::size_t r : rows) s.mean += X.row(static_cast<Eigen::Index>(r)).transpose();
  s.mean /= n;
  for (std::size_t r : rows) s.std += (X.row(static_cast<Eigen::Index>(r)).transpose() - s.mean).array().square().matrix();
  s.std = (s.std / n).array().sqrt().matrix();
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    if (!(s.std(c) > 0)) {
      const auto& names = feature_names();
      const std::string name = X.cols() == static_cast<Eigen::Index>(kFeatureCount) ? names[static_cast<std::size_t>(c)]
                                                                                    : "column " + std::to_string(c);
      throw Error(ErrorCode::degenerate_variance, "scaler: " + name + " has zero variance on training rows");
    }
  }
  return s;
}

ScalerState fit_scaler(const Eigen::MatrixXd& X) {
  std::vector<std::size_t> rows(static_cast<std::size_t>(X.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  return fit_scaler(X, rows);
}

Eigen::MatrixXd transform(const Eigen::MatrixXd& X, const ScalerState& s) {
  if (X.cols() != s.mean.size()) throw Error(ErrorCode::shape, "transform: column count differs from scaler");
  return ((X.rowwise() - s.mean.transpose()).array().rowwise() / s.std.transpose().array()).matrix();
}

Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& Z, const ScalerState& s) {
  if (Z.cols() != s.mean.size()) throw Error(ErrorCode::shape, "inverse_transform: column count differs from scaler");
  return ((Z.array().rowwise() * s.std.transpose().array()).matrix()).rowwise() + s.mean.transpose();
}

void SplitRatios::validate() const {
  if (!(train > 0 && test >= 0 && val >= 0) || std::abs(train + test + val - 1.0) > 1e-9) {
    throw Error(ErrorCode::parameter, "split ratios must be non-negative, train > 0, and sum to 1");
  }
}

FeatureTable split(const FeatureTable& table, std::uint64_t seed, const SplitRatios& ratios, SplitMode mode) {
  ratios.validate();
  const std::size_t n = table.rows();
  if (n < 10) throw Error(ErrorCode::insufficient_data, "split needs at least 10 rows, got " + std::to_string(n));
  const auto n_val = static_cast<std::size_t>(std::llround(ratios.val * static_cast<double>(n)));
  const std::size_t rest = n - n_val;
  const auto n_train =
      static_cast<std::size_t>(std::llround(static_cast<double>(rest) * ratios.train / (ratios.train + ratios.test)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  FeatureTable out = table;
  out.split.assign(n, Split::train);
  if (mode == SplitMode::shuffle) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      out.split[order[i]] = i < n_val ? Split::val : (i < n_val + n_train ? Split::train : Split::test);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      out.split[i] = i < n_train ? Split::train : (i < rest ? Split::test : Split::val);
    }
  }
  return out;
}

std::vector<Fold> shuffle_split_cv(std::span<const std::size_t> rows, std::size_t k, double train_frac,
                                   std::uint64_t seed) {
  if (k < 1) throw Error(ErrorCode::parameter, "shuffle_split_cv needs k >= 1");
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw Error(ErrorCode::parameter, "train fraction must lie in (0, 1)");
  if (rows.size() < 2) throw Error(ErrorCode::insufficient_data, "shuffle_split_cv needs at least 2 rows");
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(rows.size()))), 1, rows.size() - 1);
  std::mt19937_64 rng(seed);
  std::vector<Fold> folds;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> perm(rows.begin(), rows.end());
    std::shuffle(perm.begin(), perm.end(), rng);
    Fold fold;
    fold.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    fold.eval.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(fold.train.begin(), fold.train.end());
    std::sort(fold.eval.begin(), fold.eval.end());
    folds.push_back(std::move(fold));
  }
  return folds;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& X, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

Eigen::VectorXd select_rows(const Eigen::VectorXd& y, std::span<const std::size_t> rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(rows[i]));
  return out;
}

void write_features_csv(const std::filesystem::path& path, const FeatureTable& table) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << "time_s";
  for (const auto& n : feature_names()) out << ',' << n;
  out << ',' << kTargetName << ",split\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < table.rows(); ++i) {
    put(table.time_s[i]);
    for (Eigen::Index c = 0; c < table.X.cols(); ++c) {
      out << ',';
      put(table.X(static_cast<Eigen::Index>(i), c));
    }
    out << ',';
    put(table.y(static_cast<Eigen::Index>(i)));
    out << ',' << to_string(table.split[i]) << '\n';
  }
}

}  // namespace tke
