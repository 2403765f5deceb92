#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "tke/error.hpp"
#include "tke/stats.hpp"

using namespace tke;

namespace {

std::vector<double> randv(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::io;
}

}  // namespace

TEST_CASE("pearson hand cases") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> neg(x.size());
  std::transform(x.begin(), x.end(), neg.begin(), [](double v) { return -v; });
  CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-15));
  // sxy = 3, sxx = 2, syy = 42/9
  CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 4}) ==
        doctest::Approx(9.0 / std::sqrt(84.0)).epsilon(1e-15));
  CHECK(code_of([] { pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}); }) ==
        ErrorCode::degenerate_variance);
  CHECK(code_of([] { pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}); }) == ErrorCode::shape);
}

TEST_CASE("pearson affine invariance") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto x = randv(rng, 30), y = randv(rng, 30);
    const double r = pearson(x, y);
    CHECK(std::abs(r) <= 1.0);
    for (auto [a, c] : {std::pair{2.5, 0.3}, std::pair{-1.7, 4.0}, std::pair{0.01, -9.0}}) {
      std::vector<double> xa(x.size()), yc(y.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        xa[i] = a * x[i] + 3.0;
        yc[i] = c * y[i] - 1.0;
      }
      CHECK(std::abs(pearson(xa, yc) - (a * c > 0 ? r : -r)) <= 1e-12);
    }
  }
}

TEST_CASE("average ranks share ties") {
  CHECK(average_ranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
  CHECK(average_ranks(std::vector<double>{1, 1, 1}) == std::vector<double>{2, 2, 2});
}

TEST_CASE("spearman hand and reference cases") {
  std::vector<double> x(20), e(20), rev(20);
  for (int i = 0; i < 20; ++i) {
    x[i] = 0.3 * i - 2;
    e[i] = std::exp(x[i]);
    rev[i] = -x[i];
  }
  CHECK(spearman(x, e) == 1.0);
  CHECK(spearman(x, rev) == -1.0);
  // x ranks [1.5, 1.5, 3], y ranks [1, 3, 2]: centered products cancel.
  CHECK(std::abs(spearman(std::vector<double>{1, 1, 2}, std::vector<double>{3, 5, 4})) <= 1e-15);

  // Published reference values for these vectors (scipy.stats.spearmanr).
  const std::vector<double> v1{17, 86, 60, 77, 47, 3, 70, 87, 88, 92};
  const std::vector<double> v2{70, 29, 85, 61, 80, 34, 60, 31, 73, 66};
  CHECK(spearman(v1, v2) == doctest::Approx(-0.16363636363636364).epsilon(1e-14));
  const std::vector<double> v1t{17, 86, 60, 77, 47, 3, 70, 47, 88, 92};
  CHECK(spearman(v1t, v2) == doctest::Approx(0.024316221747202587).epsilon(1e-13));
  CHECK(code_of([] { spearman(std::vector<double>{1, 2}, std::vector<double>{1}); }) == ErrorCode::shape);
}

TEST_CASE("spearman is invariant under monotone transforms") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 50; ++t) {
    const auto x = randv(rng, 25), y = randv(rng, 25);
    std::vector<double> fx(x.size()), gy(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      fx[i] = std::exp(2 * x[i]) + x[i];
      gy[i] = std::atan(y[i]) * 7 - 1;
    }
    CHECK(std::abs(spearman(x, y) - spearman(fx, gy)) <= 1e-12);
    const auto c = correlate(x, y);
    CHECK(c.n == 25);
    CHECK(std::abs(c.spearman_rho) <= 1.0 + 1e-12);
  }
}

TEST_CASE("r_squared, mse and mae") {
  const std::vector<double> y{1, 2, 3};
  CHECK(r_squared(y, y) == 1.0);
  CHECK(r_squared(y, std::vector<double>{2, 2, 2}) == 0.0);
  CHECK(r_squared(y, std::vector<double>{1, 2, 4}) == 0.5);
  CHECK(r_squared(y, std::vector<double>{3, 2, 1}) == -3.0);  // negatives are reported
  CHECK(code_of([] { r_squared(std::vector<double>{2, 2}, std::vector<double>{1, 2}); }) ==
        ErrorCode::degenerate_variance);

  CHECK(mse(y, y) == 0.0);
  CHECK(mae(y, y) == 0.0);
  CHECK(mse(std::vector<double>{1, 1}, std::vector<double>{0, 2}) == 1.0);
  CHECK(mae(std::vector<double>{1, 1}, std::vector<double>{0, 2}) == 1.0);
  CHECK(mse(std::vector<double>{3, 0, 0}, std::vector<double>{0, 0, 0}) == 3.0);
  CHECK(mae(std::vector<double>{3, 0, 0}, std::vector<double>{0, 0, 0}) == 1.0);
  CHECK(code_of([] { mse(std::vector<double>{1}, std::vector<double>{1, 2}); }) == ErrorCode::shape);

  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    const auto a = randv(rng, 17), b = randv(rng, 17);
    const auto m = evaluate(a, b);
    CHECK(m.mse >= 0);
    CHECK(m.mae * m.mae <= m.mse * (1 + 1e-12));
    // Common affine rescaling leaves R2 unchanged.
    std::vector<double> as(a.size()), bs(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      as[i] = 3 * a[i] + 10;
      bs[i] = 3 * b[i] + 10;
    }
    CHECK(std::abs(r_squared(as, bs) - m.r2) <= 1e-12);
    double mean = 0;
    for (double v : a) mean += v;
    mean /= static_cast<double>(a.size());
    CHECK(std::abs(r_squared(a, std::vector<double>(a.size(), mean))) <= 1e-15);
  }
}

TEST_CASE("kde against the direct sum") {
  const std::vector<double> pts{-0.4, 0.1, 1.3};
  const auto curve = kde(pts, 1.0);
  CHECK(curve.bandwidth == 1.0);
  CHECK(curve.grid.size() >= 512);
  CHECK(curve.grid.front() == doctest::Approx(-5.4));
  CHECK(curve.grid.back() == doctest::Approx(6.3));
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    double s = 0;
    for (double p : pts) s += std::exp(-0.5 * (curve.grid[i] - p) * (curve.grid[i] - p));
    s /= 3.0 * std::sqrt(2.0 * std::numbers::pi);
    CHECK(std::abs(curve.density[i] - s) <= 1e-12);
  }
  CHECK(code_of([] { kde(std::vector<double>{1.0}); }) == ErrorCode::insufficient_data);
  CHECK(code_of([] { kde(std::vector<double>{1.0, 2.0}, 0.0); }) == ErrorCode::parameter);
}

TEST_CASE("kde normalization and peak") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 30; ++t) {
    auto r = randv(rng, 5 + static_cast<std::size_t>(t) * 13);
    if (t % 3 == 0) r.push_back(40.0);  // far outlier
    const auto c = kde(r);
    CHECK(c.bandwidth == doctest::Approx(silverman_bandwidth(r)));
    for (double d : c.density) CHECK(d >= 0.0);
    const double area = trapezoid(c.grid, c.density);
    CHECK(area >= 0.999);
    CHECK(area <= 1.001);
  }
  std::vector<double> sym;
  for (int i = -20; i <= 20; ++i) sym.push_back(1e-3 * i);
  const auto c = kde(sym);
  const auto peak = std::max_element(c.density.begin(), c.density.end()) - c.density.begin();
  const double step = c.grid[1] - c.grid[0];
  CHECK(std::abs(c.grid[static_cast<std::size_t>(peak)]) <= step);
}

TEST_CASE("silverman bandwidth") {
  const std::vector<double> x{1, 2, 3, 4};
  // sample sd of 1..4 is sqrt(5/3)
  CHECK(silverman_bandwidth(x) == doctest::Approx(1.06 * std::sqrt(5.0 / 3.0) * std::pow(4.0, -0.2)).epsilon(1e-14));
  CHECK(code_of([] { silverman_bandwidth(std::vector<double>{2, 2, 2}); }) == ErrorCode::degenerate_variance);
}

TEST_CASE("correlation matrices") {
  std::mt19937_64 rng(12);
  const auto a = randv(rng, 40), b = randv(rng, 40);
  std::vector<double> c(40);
  for (std::size_t i = 0; i < 40; ++i) c[i] = a[i] + 0.5 * b[i];
  const auto m = correlation_matrix({a, b, c}, {"a", "b", "c"});
  const std::vector<std::vector<double>> cols{a, b, c};
  for (int i = 0; i < 3; ++i) {
    CHECK(m.pearson(i, i) == 1.0);
    CHECK(m.spearman(i, i) == 1.0);
    for (int j = 0; j < 3; ++j) {
      CHECK(m.pearson(i, j) == m.pearson(j, i));
      CHECK(m.spearman(i, j) == m.spearman(j, i));
      if (i != j) {
        CHECK(std::abs(m.pearson(i, j) - pearson(cols[i], cols[j])) <= 1e-15);
        CHECK(std::abs(m.spearman(i, j) - spearman(cols[i], cols[j])) <= 1e-15);
      }
    }
  }
  std::string msg;
  try {
    correlation_matrix({a, std::vector<double>(40, 1.0)}, {"a", "T5"});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate_variance);
    msg = e.what();
  }
  CHECK(msg.find("T5") != std::string::npos);
}
