#pragma once

#include <vector>

#include <Eigen/Dense>

#include "tke/models/regressor.hpp"

namespace tke {

// k(a, b) = RBF(l_rbf) + RationalQuadratic(l_rq, a_rq) + White(s_w) * [a is b].
// Unit-amplitude terms; the white term lands only on the training diagonal.
struct GprKernel {
  double rbf_length_scale = 1.0;
  double white_noise = 1.0;
  double rq_length_scale = 1.0;
  double rq_alpha = 1.0;

  static constexpr int kParams = 4;

  // log of (rbf_length_scale, white_noise, rq_length_scale, rq_alpha)
  Eigen::Vector4d log_theta() const;
  static GprKernel from_log_theta(const Eigen::Vector4d& theta);

  // Covariance between distinct points at squared distance d2.
  double cross(double d2) const;
};

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

// K(X, X) including the white-noise diagonal (jitter not included).
Eigen::MatrixXd kernel_matrix(const GprKernel& k, const Eigen::MatrixXd& X);
Eigen::MatrixXd cross_kernel(const GprKernel& k, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

struct LmlValue {
  double value = 0.0;
  Eigen::Vector4d gradient = Eigen::Vector4d::Zero();  // d value / d log_theta
};

// Log marginal likelihood of y (centered by its mean) under K + alpha I:
// -1/2 r^T (K + alpha I)^-1 r - 1/2 log|K + alpha I| - N/2 log(2 pi).
// Throws conditioning error when the Cholesky factorization fails.
LmlValue gpr_lml(const GprKernel& k, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                 bool with_gradient = true);

struct GprRestart {
  bool converged = false;  // false when the start point failed to factorize
  double initial_lml = 0.0;
  double final_lml = 0.0;
  GprKernel initial;
  GprKernel final;
  std::size_t iterations = 0;
};

class GprModel final : public Regressor {
 public:
  GprModel(RegressorSpec spec, GprKernel kernel, Eigen::MatrixXd X, double y_mean, Eigen::VectorXd y_centered);

  static std::unique_ptr<GprModel> fit(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
  static std::unique_ptr<GprModel> read(const RegressorSpec& spec, BinaryReader& in);

  const GprKernel& kernel() const { return kernel_; }
  const std::vector<GprRestart>& restarts() const { return restarts_; }
  double log_marginal_likelihood() const { return lml_; }
  std::size_t training_points() const { return static_cast<std::size_t>(X_.rows()); }

  // Posterior predictive variance (white noise included).
  Eigen::VectorXd predict_variance(const Eigen::MatrixXd& X) const;

  void write_payload(BinaryWriter& out) const override;

 protected:
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& X) const override;

 private:
  void factorize();

  GprKernel kernel_;
  Eigen::MatrixXd X_;
  double y_mean_;
  Eigen::VectorXd y_centered_;
  Eigen::MatrixXd chol_lower_;
  Eigen::VectorXd weights_;  // (K + alpha I)^-1 (y - mean)
  double lml_ = 0.0;
  std::vector<GprRestart> restarts_;
};

// Hyperparameter search: projected quasi-Newton ascent in log space with
// backtracking, started from the configured values and restarts-1 seeded
// log-uniform draws. Every restart ends at an LML no lower than its start.
std::vector<GprRestart> gpr_optimize(const GprParams& params, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                     std::uint64_t seed);

// Evenly strided row subset of size min(n, cap).
std::vector<std::size_t> uniform_subsample(std::size_t n, std::size_t cap);

}  // namespace tke
