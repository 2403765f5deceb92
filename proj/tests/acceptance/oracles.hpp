#pragma once

#include <vector>

#include <Eigen/Dense>

// Direct-formula reference implementations, kept apart from the library code
// they check. Long double where summation order matters.
namespace oracle {

std::vector<double> tke(const std::vector<double>& u, const std::vector<double>& v, const std::vector<double>& w);

double pearson(const std::vector<double>& x, const std::vector<double>& y);
// Ranks by counting smaller and equal entries, O(n^2).
std::vector<double> ranks(const std::vector<double>& x);
double spearman(const std::vector<double>& x, const std::vector<double>& y);
double r_squared(const std::vector<double>& y, const std::vector<double>& p);
double mse(const std::vector<double>& y, const std::vector<double>& p);
double mae(const std::vector<double>& y, const std::vector<double>& p);

double gaussian_kde(const std::vector<double>& pts, double h, double x);

struct Kernel {
  double rbf_l, white, rq_l, rq_a;
};
Eigen::MatrixXd gram(const Kernel& k, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, bool add_white);
// Dense LU solve and determinant, y centered by its mean.
double gpr_lml(const Kernel& k, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha);
Eigen::VectorXd gpr_mean(const Kernel& k, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                         const Eigen::MatrixXd& Q);

double leaf_objective(double w, double G, double H, double l1, double l2);
// Smallest objective over an evenly spaced grid of `points` values in [lo, hi].
double leaf_grid_min(double G, double H, double l1, double l2, double lo, double hi, int points);

}  // namespace oracle
