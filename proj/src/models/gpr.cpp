#include "tke/models/gpr.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "tke/error.hpp"
#include "tke/models/model_io.hpp"
#include "tke/parallel.hpp"

namespace tke {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct KernelTerms {
  double rbf;
  double rq;
  double rq_base;  // 1 + d2 / (2 a l^2)
};

KernelTerms terms(const GprKernel& k, double d2) {
  const double rbf = std::exp(-0.5 * d2 / (k.rbf_length_scale * k.rbf_length_scale));
  const double base = 1.0 + d2 / (2.0 * k.rq_alpha * k.rq_length_scale * k.rq_length_scale);
  return {rbf, std::pow(base, -k.rq_alpha), base};
}

std::string describe(const GprKernel& k, double alpha) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "rbf_length_scale=%.6g white_noise=%.6g rq_length_scale=%.6g rq_alpha=%.6g, jitter %.6g",
                k.rbf_length_scale, k.white_noise, k.rq_length_scale, k.rq_alpha, alpha);
  return buf;
}

// LML on precomputed squared distances.
LmlValue lml_from_distances(const GprKernel& k, const Eigen::MatrixXd& d2, const Eigen::VectorXd& r, double alpha,
                            bool with_gradient) {
  const Eigen::Index n = d2.rows();
  Eigen::MatrixXd K(n, n);
  Eigen::MatrixXd rbf_m, rq_m;
  if (with_gradient) {
    rbf_m.resize(n, n);
    rq_m.resize(n, n);
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      const auto t = terms(k, d2(i, j));
      K(i, j) = K(j, i) = t.rbf + t.rq;
      if (with_gradient) {
        rbf_m(i, j) = t.rbf;
        rq_m(i, j) = t.rq;
      }
    }
  }
  K.diagonal().array() += k.white_noise + alpha;

  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::conditioning, "Cholesky of K + alpha I failed (" + describe(k, alpha) + ")");
  }
  const Eigen::VectorXd a = llt.solve(r);
  const Eigen::MatrixXd& L = llt.matrixLLT();
  double log_det_half = 0;
  for (Eigen::Index i = 0; i < n; ++i) log_det_half += std::log(L(i, i));

  LmlValue out;
  out.value = -0.5 * r.dot(a) - log_det_half - 0.5 * static_cast<double>(n) * kLog2Pi;
  if (!std::isfinite(out.value)) {
    throw Error(ErrorCode::conditioning, "non-finite log marginal likelihood (" + describe(k, alpha) + ")");
  }
  if (!with_gradient) return out;

  // d LML / d theta = 1/2 tr((a a^T - K^-1) dK/dtheta); symmetric, so sum the lower triangle twice.
  const Eigen::MatrixXd K_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  const double l_rbf2 = k.rbf_length_scale * k.rbf_length_scale;
  const double l_rq2 = k.rq_length_scale * k.rq_length_scale;
  double g_rbf = 0, g_rq_l = 0, g_rq_a = 0, trace_w = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double w = 2.0 * (a(i) * a(j) - K_inv(i, j));
      const double dist2 = d2(i, j);
      const double rbf = rbf_m(i, j);
      const double rq = rq_m(i, j);
      const double base = 1.0 + dist2 / (2.0 * k.rq_alpha * l_rq2);
      g_rbf += w * rbf * dist2 / l_rbf2;
      g_rq_l += w * rq * (dist2 / l_rq2) / base;
      g_rq_a += w * rq * k.rq_alpha * (-std::log(base) + dist2 / (2.0 * k.rq_alpha * l_rq2 * base));
    }
    trace_w += a(j) * a(j) - K_inv(j, j);
  }
  out.gradient << 0.5 * g_rbf, 0.5 * k.white_noise * trace_w, 0.5 * g_rq_l, 0.5 * g_rq_a;
  return out;
}

struct Bounds {
  Eigen::Vector4d lower;
  Eigen::Vector4d upper;
  Eigen::Vector4d initial;
};

Bounds log_bounds(const GprParams& p) {
  Bounds b;
  const Hyper* hs[4] = {&p.rbf_length_scale, &p.white_noise, &p.rq_length_scale, &p.rq_alpha};
  for (int i = 0; i < 4; ++i) {
    b.lower(i) = std::log(hs[i]->lower);
    b.upper(i) = std::log(hs[i]->upper);
    b.initial(i) = std::clamp(std::log(hs[i]->value), b.lower(i), b.upper(i));
  }
  return b;
}

}  // namespace

Eigen::Vector4d GprKernel::log_theta() const {
  return {std::log(rbf_length_scale), std::log(white_noise), std::log(rq_length_scale), std::log(rq_alpha)};
}

GprKernel GprKernel::from_log_theta(const Eigen::Vector4d& theta) {
  return {std::exp(theta(0)), std::exp(theta(1)), std::exp(theta(2)), std::exp(theta(3))};
}

double GprKernel::cross(double d2) const {
  const auto t = terms(*this, d2);
  return t.rbf + t.rq;
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.cols() != B.cols()) throw Error(ErrorCode::shape, "squared_distances: column mismatch");
  Eigen::MatrixXd d2(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) d2(i, j) = (A.row(i) - B.row(j)).squaredNorm();
  }
  return d2;
}

Eigen::MatrixXd kernel_matrix(const GprKernel& k, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd K = cross_kernel(k, X, X);
  K.diagonal().array() += k.white_noise;
  return K;
}

Eigen::MatrixXd cross_kernel(const GprKernel& k, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd K = squared_distances(A, B);
  K = K.unaryExpr([&](double d2) { return k.cross(d2); });
  return K;
}

LmlValue gpr_lml(const GprKernel& k, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha,
                 bool with_gradient) {
  if (X.rows() != y.size() || X.rows() == 0) throw Error(ErrorCode::shape, "gpr_lml: X/y row mismatch or empty");
  const Eigen::VectorXd r = y.array() - y.mean();
  return lml_from_distances(k, squared_distances(X, X), r, alpha, with_gradient);
}

std::vector<std::size_t> uniform_subsample(std::size_t n, std::size_t cap) {
  const std::size_t m = std::min(n, cap);
  std::vector<std::size_t> rows(m);
  for (std::size_t i = 0; i < m; ++i) rows[i] = static_cast<std::size_t>((static_cast<unsigned __int128>(i) * n) / m);
  return rows;
}

std::vector<GprRestart> gpr_optimize(const GprParams& p, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                     std::uint64_t seed) {
  const Eigen::MatrixXd d2 = squared_distances(X, X);
  const Eigen::VectorXd r = y.array() - y.mean();
  const Bounds b = log_bounds(p);
  Eigen::Vector4d free_mask;
  for (int i = 0; i < 4; ++i) free_mask(i) = b.lower(i) < b.upper(i) ? 1.0 : 0.0;

  auto evaluate = [&](const Eigen::Vector4d& theta, bool grad) {
    return lml_from_distances(GprKernel::from_log_theta(theta), d2, r, p.alpha, grad);
  };

  std::vector<GprRestart> out;
  for (std::size_t restart = 0; restart < std::max<std::size_t>(p.restarts, 1); ++restart) {
    Eigen::Vector4d theta = b.initial;
    if (restart > 0) {
      // Log-uniform within two decades of the configured start.
      std::mt19937_64 rng(derive_seed(seed, restart));
      for (int i = 0; i < 4; ++i) {
        if (free_mask(i) == 0.0) continue;
        const double lo = std::max(b.lower(i), b.initial(i) - std::log(100.0));
        const double hi = std::min(b.upper(i), b.initial(i) + std::log(100.0));
        theta(i) = std::uniform_real_distribution<double>(lo, hi)(rng);
      }
    }
    GprRestart trace;
    trace.initial = GprKernel::from_log_theta(theta);
    LmlValue current;
    try {
      current = evaluate(theta, true);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::conditioning) throw;
      trace.final = trace.initial;
      out.push_back(trace);
      continue;
    }
    trace.converged = true;
    trace.initial_lml = current.value;

    // Projected quasi-Newton ascent; H approximates the inverse Hessian of -LML.
    Eigen::Matrix4d H = Eigen::Matrix4d::Identity();
    std::size_t it = 0;
    for (; it < p.max_iterations; ++it) {
      const Eigen::Vector4d g = current.gradient.cwiseProduct(free_mask);
      Eigen::Vector4d active = free_mask;
      for (int i = 0; i < 4; ++i) {
        if ((theta(i) <= b.lower(i) && g(i) < 0) || (theta(i) >= b.upper(i) && g(i) > 0)) active(i) = 0.0;
      }
      const Eigen::Vector4d g_free = g.cwiseProduct(active);
      if (!(g_free.lpNorm<Eigen::Infinity>() > 1e-7)) break;
      Eigen::Vector4d d = (H * g_free).cwiseProduct(active);
      if (!(g_free.dot(d) > 0)) {
        H.setIdentity();
        d = g_free;
      }
      const double longest = d.lpNorm<Eigen::Infinity>();
      if (longest > 2.0) d *= 2.0 / longest;

      bool accepted = false;
      Eigen::Vector4d candidate;
      double t = 1.0;
      for (int tries = 0; tries < 30; ++tries, t *= 0.5) {
        candidate = (theta + t * d).cwiseMax(b.lower).cwiseMin(b.upper);
        const double predicted = g.dot(candidate - theta);
        if (!(predicted > 0)) continue;
        try {
          if (evaluate(candidate, false).value >= current.value + 1e-4 * predicted) {
            accepted = true;
            break;
          }
        } catch (const Error& e) {
          if (e.code() != ErrorCode::conditioning) throw;
        }
      }
      if (!accepted) break;
      const LmlValue next = evaluate(candidate, true);
      const double gain = next.value - current.value;
      const Eigen::Vector4d s = candidate - theta;
      const Eigen::Vector4d yv = -(next.gradient - current.gradient).cwiseProduct(free_mask);
      const double sy = s.dot(yv);
      if (sy > 1e-12) {
        const double rho = 1.0 / sy;
        const Eigen::Matrix4d I = Eigen::Matrix4d::Identity();
        H = (I - rho * s * yv.transpose()) * H * (I - rho * yv * s.transpose()) + rho * s * s.transpose();
      }
      theta = candidate;
      current = next;
      if (gain < 1e-8 * (1.0 + std::abs(current.value))) {
        ++it;
        break;
      }
    }
    trace.iterations = it;
    trace.final_lml = current.value;
    trace.final = GprKernel::from_log_theta(theta);
    out.push_back(trace);
  }
  return out;
}

GprModel::GprModel(RegressorSpec spec, GprKernel kernel, Eigen::MatrixXd X, double y_mean, Eigen::VectorXd y_centered)
    : Regressor(std::move(spec), static_cast<std::size_t>(X.cols())),
      kernel_(kernel),
      X_(std::move(X)),
      y_mean_(y_mean),
      y_centered_(std::move(y_centered)) {
  factorize();
}

void GprModel::factorize() {
  const double alpha = std::get<GprParams>(spec().params).alpha;
  Eigen::MatrixXd K = kernel_matrix(kernel_, X_);
  K.diagonal().array() += alpha;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::conditioning, "Cholesky of K + alpha I failed (" + describe(kernel_, alpha) + ")");
  }
  chol_lower_ = llt.matrixL();
  weights_ = llt.solve(y_centered_);
  const Eigen::Index n = X_.rows();
  lml_ = -0.5 * y_centered_.dot(weights_) - chol_lower_.diagonal().array().log().sum() -
         0.5 * static_cast<double>(n) * kLog2Pi;
}

std::unique_ptr<GprModel> GprModel::fit(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  spec.validate();
  const auto& p = std::get<GprParams>(spec.params);
  require_training_shape(X, y, 2);
  const auto n = static_cast<std::size_t>(X.rows());
  const auto rows = uniform_subsample(n, p.max_points);
  const Eigen::MatrixXd Xs = rows.size() == n ? X : Eigen::MatrixXd(X(rows, Eigen::all));
  const Eigen::VectorXd ys = rows.size() == n ? y : Eigen::VectorXd(y(rows));

  const Bounds b = log_bounds(p);
  GprKernel chosen = GprKernel::from_log_theta(b.initial);
  std::vector<GprRestart> restarts;
  if (p.optimize) {
    const auto opt_rows = uniform_subsample(static_cast<std::size_t>(Xs.rows()), p.optimize_points);
    const Eigen::MatrixXd Xo = Xs(opt_rows, Eigen::all);
    const Eigen::VectorXd yo = ys(opt_rows);
    restarts = gpr_optimize(p, Xo, yo, spec.seed);
    const GprRestart* best = nullptr;
    for (const auto& r : restarts) {
      if (r.converged && (!best || r.final_lml > best->final_lml)) best = &r;
    }
    if (!best) {
      throw Error(ErrorCode::conditioning,
                  "every GPR restart failed to factorize K + alpha I (jitter " + std::to_string(p.alpha) + ")");
    }
    chosen = best->final;
  }
  const bool constant = (ys.array() == ys(0)).all();
  const double mean = constant ? ys(0) : ys.mean();
  auto model = std::make_unique<GprModel>(spec, chosen, Xs, mean, Eigen::VectorXd(ys.array() - mean));
  model->restarts_ = std::move(restarts);
  return model;
}

Eigen::VectorXd GprModel::predict_rows(const Eigen::MatrixXd& X) const {
  const Eigen::MatrixXd Ks = cross_kernel(kernel_, X, X_);
  return (Ks * weights_).array() + y_mean_;
}

Eigen::VectorXd GprModel::predict_variance(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != n_features()) throw Error(ErrorCode::shape, "predict_variance: column mismatch");
  const Eigen::MatrixXd Ks = cross_kernel(kernel_, X_, X);  // n_train x n_query
  const Eigen::MatrixXd V = chol_lower_.triangularView<Eigen::Lower>().solve(Ks);
  const double prior = kernel_.cross(0.0) + kernel_.white_noise;
  return (prior - V.colwise().squaredNorm().array()).max(0.0).matrix().transpose();
}

void GprModel::write_payload(BinaryWriter& out) const {
  out.put(kernel_.rbf_length_scale);
  out.put(kernel_.white_noise);
  out.put(kernel_.rq_length_scale);
  out.put(kernel_.rq_alpha);
  out.put(y_mean_);
  out.put_matrix(X_);
  out.put_vector(y_centered_);
}

std::unique_ptr<GprModel> GprModel::read(const RegressorSpec& spec, BinaryReader& in) {
  GprKernel k;
  k.rbf_length_scale = in.get<double>();
  k.white_noise = in.get<double>();
  k.rq_length_scale = in.get<double>();
  k.rq_alpha = in.get<double>();
  const double mean = in.get<double>();
  Eigen::MatrixXd X = in.get_matrix();
  Eigen::VectorXd yc = in.get_vector();
  if (X.rows() != yc.size()) throw Error(ErrorCode::parse, "model file: GPR training shapes disagree");
  return std::make_unique<GprModel>(spec, k, std::move(X), mean, std::move(yc));
}

}  // namespace tke
