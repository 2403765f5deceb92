#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "tke/error.hpp"
#include "tke/models/gpr.hpp"

using namespace tke;

namespace {

// Written out independently of the library kernel.
double k_ref(const GprKernel& k, const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b, bool same) {
  const double d2 = (a - b).squaredNorm();
  const double l = k.rbf_length_scale, m = k.rq_length_scale, al = k.rq_alpha;
  double v = std::exp(-d2 / (2 * l * l)) + std::pow(1 + d2 / (2 * al * m * m), -al);
  if (same) v += k.white_noise;
  return v;
}

Eigen::MatrixXd K_ref(const GprKernel& k, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd K(X.rows(), X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.rows(); ++j) K(i, j) = k_ref(k, X.row(i), X.row(j), i == j);
  return K;
}

Hyper pinned(double v) { return {v, v, v}; }

RegressorSpec fixed_spec(GprKernel k, double alpha) {
  RegressorSpec s = RegressorSpec::defaults(ModelKind::gpr);
  auto& p = std::get<GprParams>(s.params);
  p.rbf_length_scale = pinned(k.rbf_length_scale);
  p.white_noise = pinned(k.white_noise);
  p.rq_length_scale = pinned(k.rq_length_scale);
  p.rq_alpha = pinned(k.rq_alpha);
  p.alpha = alpha;
  p.optimize = false;
  return s;
}

}  // namespace

TEST_CASE("kernel matches the closed form and is PSD") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(-2, 2);
  for (int t = 0; t < 50; ++t) {
    const GprKernel k{std::exp(u(rng)), std::exp(u(rng)), std::exp(u(rng)), std::exp(u(rng))};
    const Eigen::MatrixXd X = Eigen::MatrixXd::NullaryExpr(12, 3, [&] { return g(rng); });
    const Eigen::MatrixXd K = kernel_matrix(k, X);
    CHECK((K - K.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((K - K_ref(k, X)).cwiseAbs().maxCoeff() <= 1e-13);
    Eigen::MatrixXd noiseless = K;
    noiseless.diagonal().array() -= k.white_noise;
    const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(noiseless).eigenvalues().minCoeff();
    CHECK(lo >= -1e-10);
    const Eigen::MatrixXd C = cross_kernel(k, X, X);
    CHECK((C - noiseless).cwiseAbs().maxCoeff() <= 1e-13);
  }
  const GprKernel k{2.0, 0.1, 0.5, 3.0};
  CHECK(GprKernel::from_log_theta(k.log_theta()).rq_alpha == doctest::Approx(3.0));
}

TEST_CASE("single point log marginal likelihood") {
  Eigen::MatrixXd X(1, 2);
  X << 0.3, -1.0;
  Eigen::VectorXd y(1);
  y << 7.0;  // centered away
  const GprKernel k{1.0, 0.99, 1.0, 1.0};
  // k(x, x) + alpha = 1 + 1 + 0.99 + 0.01
  const double expect = -0.5 * std::log(3.0) - 0.5 * std::log(2 * std::numbers::pi);
  CHECK(gpr_lml(k, X, y, 0.01).value == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("three point likelihood and posterior against an explicit inverse") {
  Eigen::MatrixXd X(3, 2);
  X << 0, 0, 1, 0.5, -0.5, 2;
  Eigen::VectorXd y(3);
  y << 1.0, -0.5, 2.0;
  const GprKernel k{0.8, 0.05, 1.7, 0.6};
  const double alpha = 0.01;
  Eigen::MatrixXd A = K_ref(k, X);
  A.diagonal().array() += alpha;
  const Eigen::MatrixXd Ainv = A.inverse();
  const Eigen::VectorXd r = y.array() - y.mean();
  const double lml = -0.5 * r.dot(Ainv * r) - 0.5 * std::log(A.determinant()) - 1.5 * std::log(2 * std::numbers::pi);
  CHECK(gpr_lml(k, X, y, alpha).value == doctest::Approx(lml).epsilon(1e-12));

  const GprModel m(fixed_spec(k, alpha), k, X, y.mean(), r);
  Eigen::MatrixXd q(2, 2);
  q << 0.2, 0.1, 3, -1;
  const Eigen::VectorXd p = m.predict(q);
  for (Eigen::Index i = 0; i < 2; ++i) {
    Eigen::RowVectorXd ks(3);
    for (Eigen::Index j = 0; j < 3; ++j) ks(j) = k_ref(k, q.row(i), X.row(j), false);
    CHECK(p(i) == doctest::Approx(y.mean() + (ks * Ainv * r)(0)).epsilon(1e-12));
    const double var = k_ref(k, q.row(i), q.row(i), true) - (ks * Ainv * ks.transpose())(0);
    CHECK(m.predict_variance(q)(i) == doctest::Approx(var).epsilon(1e-10));
  }
  CHECK(m.log_marginal_likelihood() == doctest::Approx(lml).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches finite differences") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 10; ++t) {
    const Eigen::MatrixXd X = Eigen::MatrixXd::NullaryExpr(15, 3, [&] { return g(rng); });
    const Eigen::VectorXd y = Eigen::VectorXd::NullaryExpr(15, [&] { return g(rng); });
    const GprKernel k{std::exp(u(rng)), std::exp(u(rng) - 1), std::exp(u(rng)), std::exp(u(rng))};
    const auto v = gpr_lml(k, X, y, 0.01);
    const Eigen::Vector4d th = k.log_theta();
    for (int i = 0; i < 4; ++i) {
      const double h = 1e-5;
      Eigen::Vector4d a = th, b = th;
      a(i) += h;
      b(i) -= h;
      const double fd = (gpr_lml(GprKernel::from_log_theta(a), X, y, 0.01, false).value -
                         gpr_lml(GprKernel::from_log_theta(b), X, y, 0.01, false).value) /
                        (2 * h);
      CHECK(std::abs(fd - v.gradient(i)) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("optimizer never ends below its start") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  const Eigen::MatrixXd X = Eigen::MatrixXd::NullaryExpr(60, 2, [&] { return g(rng); });
  Eigen::VectorXd y(60);
  for (Eigen::Index i = 0; i < 60; ++i) y(i) = std::sin(2 * X(i, 0)) + 0.1 * g(rng);
  GprParams p;
  p.restarts = 5;
  const auto rs = gpr_optimize(p, X, y, 11);
  REQUIRE(rs.size() == 5);
  for (const auto& r : rs) {
    REQUIRE(r.converged);
    CHECK(r.final_lml >= r.initial_lml);
    CHECK(r.final_lml == doctest::Approx(gpr_lml(r.final, X, y, p.alpha, false).value).epsilon(1e-12));
  }
  CHECK(rs[0].initial.rbf_length_scale == 1.0);
  const auto again = gpr_optimize(p, X, y, 11);
  for (std::size_t i = 0; i < rs.size(); ++i) CHECK(again[i].final_lml == rs[i].final_lml);
}

TEST_CASE("noise-free interpolation") {
  Eigen::MatrixXd X(8, 1);
  Eigen::VectorXd y(8);
  for (int i = 0; i < 8; ++i) {
    X(i, 0) = i;
    y(i) = std::sin(X(i, 0));
  }
  const GprKernel k{0.5, 1e-10, 0.5, 1.0};
  const auto m = GprModel::fit(fixed_spec(k, 1e-10), X, y);
  CHECK((m->predict(X) - y).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("every restart failing is a conditioning error") {
  // Duplicate rows with no jitter leave K + alpha I singular.
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(4, 2);
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  auto spec = fixed_spec(GprKernel{1.0, 1e-300, 1.0, 1.0}, 0.0);
  std::get<GprParams>(spec.params).optimize = true;
  try {
    GprModel::fit(spec, X, y);
    FAIL("expected conditioning error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::conditioning);
    CHECK(std::string(e.what()).find("jitter") != std::string::npos);
  }
}

TEST_CASE("uniform_subsample") {
  CHECK(uniform_subsample(5, 10) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  const auto s = uniform_subsample(100, 10);
  CHECK(s.size() == 10);
  CHECK(s.front() == 0);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] > s[i - 1]);
}
