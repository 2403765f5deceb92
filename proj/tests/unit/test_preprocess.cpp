#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "tke/error.hpp"
#include "tke/preprocess.hpp"

using namespace tke;

namespace {

ClusterDataset make(std::size_t n, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  ClusterDataset ds;
  ds.name = "D";
  for (std::size_t i = 0; i < n; ++i) {
    SampleRecord r;
    r.time_s = static_cast<double>(i) / 10.0;
    r.u_ms = 2 + g(rng);
    r.v_ms = g(rng);
    r.w_ms = g(rng);
    r.sonic_T_C = 20 + g(rng);
    for (auto& t : r.T_C) t = 25 + 3 * g(rng);
    ds.records.push_back(r);
  }
  ds.provenance.push_back({"D.csv", n});
  return ds;
}

FeatureTable table(std::size_t n, std::uint64_t seed = 1) {
  const auto ds = make(n, seed);
  return assemble(ds, compute_turbulence(ds));
}

std::size_t count(const FeatureTable& t, Split s) { return t.rows_in(s).size(); }

}  // namespace

TEST_CASE("assemble pairs features with TKE_MA") {
  const auto ds = make(5);
  const auto turb = compute_turbulence(ds);
  const auto t = assemble(ds, turb);
  CHECK(t.X.rows() == 5);
  CHECK(t.X.cols() == 8);
  CHECK(t.y.size() == 5);
  CHECK(t.X(2, 7) == ds.records[2].sonic_T_C);
  CHECK(t.X(3, 0) == ds.records[3].T_C[0]);
  CHECK(t.X(3, 6) == ds.records[3].T_C[6]);
  CHECK(t.y(4) == turb.tke_ma[4]);
  CHECK(feature_names()[7] == "sonic_T");

  auto short_turb = turb;
  short_turb.tke.pop_back();
  short_turb.tke_ma.pop_back();
  short_turb.time_s.pop_back();
  CHECK_THROWS_AS(assemble(ds, short_turb), Error);
  auto shifted = turb;
  shifted.time_s[1] += 0.05;
  try {
    assemble(ds, shifted);
    FAIL("expected alignment error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::alignment);
  }
}

TEST_CASE("scaler hand case and round trip") {
  Eigen::MatrixXd X(2, 1);
  X << 1, 3;
  const auto s = fit_scaler(X);
  CHECK(s.mean(0) == 2.0);
  CHECK(s.std(0) == 1.0);
  const Eigen::MatrixXd Z = transform(X, s);
  CHECK(Z(0, 0) == -1.0);
  CHECK(Z(1, 0) == 1.0);

  const auto t = split(table(500), 42);
  const auto train = t.rows_in(Split::train);
  const auto sc = fit_scaler(t.X, train);
  const Eigen::MatrixXd Zt = select_rows(transform(t.X, sc), train);
  for (Eigen::Index c = 0; c < 8; ++c) {
    const double m = Zt.col(c).mean();
    const double sd = std::sqrt((Zt.col(c).array() - m).square().mean());
    CHECK(std::abs(m) <= 1e-9);
    CHECK(std::abs(sd - 1.0) <= 1e-9);
  }
  const Eigen::MatrixXd back = inverse_transform(transform(t.X, sc), sc);
  CHECK((back - t.X).cwiseAbs().maxCoeff() <= 1e-12 * t.X.cwiseAbs().maxCoeff());
}

TEST_CASE("scaler ignores non-training rows") {
  const auto t = split(table(300), 7);
  const auto train = t.rows_in(Split::train);
  const auto a = fit_scaler(t.X, train);
  auto perturbed = t.X;
  for (std::size_t r : t.rows_in(Split::val)) perturbed.row(static_cast<Eigen::Index>(r)).array() += 1000.0;
  for (std::size_t r : t.rows_in(Split::test)) perturbed.row(static_cast<Eigen::Index>(r)).array() *= -3.0;
  const auto b = fit_scaler(perturbed, train);
  CHECK(a.mean == b.mean);
  CHECK(a.std == b.std);
}

TEST_CASE("zero-variance training column names the feature") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(10, 8);
  X.col(4).setConstant(2.0);
  try {
    fit_scaler(X);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate_variance);
    CHECK(std::string(e.what()).find("T5") != std::string::npos);
  }
}

TEST_CASE("split arithmetic 64/16/20") {
  for (std::size_t n : {100u, 1000u, 4321u, 10u, 57u}) {
    const auto t = split(table(n), 42);
    const double N = static_cast<double>(n);
    CHECK(std::abs(static_cast<double>(count(t, Split::train)) - 0.64 * N) <= 1.0);
    CHECK(std::abs(static_cast<double>(count(t, Split::test)) - 0.16 * N) <= 1.0);
    CHECK(std::abs(static_cast<double>(count(t, Split::val)) - 0.20 * N) <= 1.0);
    CHECK(count(t, Split::train) + count(t, Split::test) + count(t, Split::val) == n);
  }
  const auto t = split(table(100), 3);
  CHECK(count(t, Split::train) == 64);
  CHECK(count(t, Split::test) == 16);
  CHECK(count(t, Split::val) == 20);
  CHECK_THROWS_AS(split(table(9), 1), Error);
  CHECK_THROWS_AS(split(table(50), 1, SplitRatios{0.5, 0.2, 0.2}), Error);
}

TEST_CASE("split is deterministic and seed dependent") {
  const auto base = table(1000);
  const auto a = split(base, 42), b = split(base, 42), c = split(base, 43);
  CHECK(a.split == b.split);
  CHECK(a.split != c.split);
  const auto dir = std::filesystem::temp_directory_path() / "tke_split_test";
  std::filesystem::create_directories(dir);
  write_features_csv(dir / "a.csv", a);
  write_features_csv(dir / "b.csv", b);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  const std::string head = slurp(dir / "a.csv").substr(0, 60);
  CHECK(head.rfind("time_s,T1,T2,T3,T4,T5,T6,T7,sonic_T,TKE_MA,split", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("chronological split keeps time order") {
  const auto t = split(table(200), 1, {}, SplitMode::chronological);
  for (std::size_t i = 0; i < 200; ++i) {
    const Split expect = i < 128 ? Split::train : (i < 160 ? Split::test : Split::val);
    CHECK(t.split[i] == expect);
  }
  CHECK(split_mode_from_string("chronological") == SplitMode::chronological);
  CHECK_THROWS_AS(split_mode_from_string("blocks"), Error);
}

TEST_CASE("shuffle_split_cv partitions") {
  std::vector<std::size_t> rows(100);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = 3 * i;
  const auto folds = shuffle_split_cv(rows, 5, 0.8, 42);
  REQUIRE(folds.size() == 5);
  for (const auto& f : folds) {
    CHECK(f.train.size() == 80);
    CHECK(f.eval.size() == 20);
    std::set<std::size_t> all(f.train.begin(), f.train.end());
    for (std::size_t r : f.eval) CHECK(all.insert(r).second);
    CHECK(all == std::set<std::size_t>(rows.begin(), rows.end()));
  }
  CHECK(folds[0].eval != folds[1].eval);
  CHECK(shuffle_split_cv(rows, 1, 0.8, 42).size() == 1);
  CHECK(shuffle_split_cv(rows, 5, 0.8, 42)[3].eval == folds[3].eval);
  CHECK_THROWS_AS(shuffle_split_cv(rows, 5, 1.0, 42), Error);
  CHECK_THROWS_AS(shuffle_split_cv(rows, 0, 0.8, 42), Error);
}
