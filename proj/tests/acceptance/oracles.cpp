#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace oracle {

namespace {

long double mean(const std::vector<double>& x) {
  long double s = 0;
  for (double v : x) s += v;
  return s / static_cast<long double>(x.size());
}

}  // namespace

std::vector<double> tke(const std::vector<double>& u, const std::vector<double>& v, const std::vector<double>& w) {
  const long double mu = mean(u), mv = mean(v), mw = mean(w);
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const long double a = u[i] - mu, b = v[i] - mv, c = w[i] - mw;
    out[i] = static_cast<double>(0.5L * (a * a + b * b + c * c));
  }
  return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const long double mx = mean(x), my = mean(y);
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      if (v < x[i]) ++less;
      if (v == x[i]) ++equal;
    }
    r[i] = less + (equal + 1) / 2;
  }
  return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) { return pearson(ranks(x), ranks(y)); }

double r_squared(const std::vector<double>& y, const std::vector<double>& p) {
  const long double m = mean(y);
  long double res = 0, tot = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    res += (static_cast<long double>(y[i]) - p[i]) * (static_cast<long double>(y[i]) - p[i]);
    tot += (y[i] - m) * (y[i] - m);
  }
  return static_cast<double>(1 - res / tot);
}

double mse(const std::vector<double>& y, const std::vector<double>& p) {
  long double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (static_cast<long double>(y[i]) - p[i]) * (static_cast<long double>(y[i]) - p[i]);
  return static_cast<double>(s / y.size());
}

double mae(const std::vector<double>& y, const std::vector<double>& p) {
  long double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(static_cast<long double>(y[i]) - p[i]);
  return static_cast<double>(s / y.size());
}

double gaussian_kde(const std::vector<double>& pts, double h, double x) {
  long double s = 0;
  for (double p : pts) {
    const long double z = (x - p) / static_cast<long double>(h);
    s += std::exp(-z * z / 2);
  }
  return static_cast<double>(s / (pts.size() * h * std::sqrt(2 * std::numbers::pi_v<long double>)));
}

Eigen::MatrixXd gram(const Kernel& k, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, bool add_white) {
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
      double d2 = 0;
      for (Eigen::Index c = 0; c < A.cols(); ++c) d2 += (A(i, c) - B(j, c)) * (A(i, c) - B(j, c));
      K(i, j) = std::exp(-d2 / (2 * k.rbf_l * k.rbf_l)) + std::pow(1 + d2 / (2 * k.rq_a * k.rq_l * k.rq_l), -k.rq_a);
      if (add_white && i == j) K(i, j) += k.white;
    }
  }
  return K;
}

double gpr_lml(const Kernel& k, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha) {
  Eigen::MatrixXd A = gram(k, X, X, true);
  A.diagonal().array() += alpha;
  const Eigen::VectorXd r = y.array() - y.mean();
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  const auto n = static_cast<double>(X.rows());
  return -0.5 * r.dot(lu.solve(r)) - 0.5 * std::log(lu.determinant()) - 0.5 * n * std::log(2 * std::numbers::pi);
}

Eigen::VectorXd gpr_mean(const Kernel& k, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                         const Eigen::MatrixXd& Q) {
  Eigen::MatrixXd A = gram(k, X, X, true);
  A.diagonal().array() += alpha;
  const Eigen::VectorXd r = y.array() - y.mean();
  const Eigen::VectorXd wts = Eigen::FullPivLU<Eigen::MatrixXd>(A).solve(r);
  return (gram(k, Q, X, false) * wts).array() + y.mean();
}

double leaf_objective(double w, double G, double H, double l1, double l2) {
  return G * w + 0.5 * (H + l2) * w * w + l1 * std::abs(w);
}

double leaf_grid_min(double G, double H, double l1, double l2, double lo, double hi, int points) {
  double best = INFINITY;
  for (int i = 0; i < points; ++i) {
    const double w = lo + (hi - lo) * i / (points - 1);
    best = std::min(best, leaf_objective(w, G, H, l1, l2));
  }
  return best;
}

}  // namespace oracle
