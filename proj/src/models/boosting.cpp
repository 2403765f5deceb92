#include "tke/models/boosting.hpp"

#include <numeric>

#include "tke/error.hpp"
#include "tke/models/model_io.hpp"

namespace tke {

BoostedModel::BoostedModel(RegressorSpec spec, std::size_t n_features, double initial, std::vector<BoostStage> stages)
    : Regressor(std::move(spec), n_features), initial_(initial), stages_(std::move(stages)) {}

Eigen::VectorXd BoostedModel::predict_staged(const Eigen::MatrixXd& X, std::size_t count) const {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), initial_);
  count = std::min(count, stages_.size());
  for (std::size_t j = 0; j < count; ++j) out += stages_[j].rate * stages_[j].tree.predict(X);
  return out;
}

Eigen::VectorXd BoostedModel::predict_rows(const Eigen::MatrixXd& X) const { return predict_staged(X, stages_.size()); }

void BoostedModel::write_payload(BinaryWriter& out) const {
  out.put(initial_);
  out.put<std::uint64_t>(stages_.size());
  for (const auto& s : stages_) {
    out.put(s.rate);
    s.tree.write(out);
  }
}

void BoostedModel::read_payload(BinaryReader& in, double& initial, std::vector<BoostStage>& stages) {
  initial = in.get<double>();
  const auto count = in.get<std::uint64_t>();
  if (count > 1000000) throw Error(ErrorCode::parse, "model file: bad stage count");
  stages.clear();
  for (std::uint64_t i = 0; i < count; ++i) {
    BoostStage s;
    s.rate = in.get<double>();
    s.tree = DecisionTree::read(in);
    stages.push_back(std::move(s));
  }
}

std::unique_ptr<GbrModel> GbrModel::fit(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  spec.validate();
  const auto& p = std::get<GbrParams>(spec.params);
  require_training_shape(X, y, 2);
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);

  const double f0 = (y.array() == y(0)).all() ? y(0) : y.mean();
  Eigen::VectorXd F = Eigen::VectorXd::Constant(X.rows(), f0);
  std::vector<BoostStage> stages;
  stages.reserve(p.estimators);
  const CartOptions options{p.max_depth, p.min_samples_split, 0, 0};
  for (std::size_t j = 0; j < p.estimators; ++j) {
    const Eigen::VectorXd residual = y - F;
    BoostStage stage{fit_cart(X, residual, rows, options), p.learning_rate};
    F += stage.rate * stage.tree.predict(X);
    stages.push_back(std::move(stage));
  }
  return std::make_unique<GbrModel>(spec, static_cast<std::size_t>(X.cols()), f0, std::move(stages));
}

std::unique_ptr<GbrModel> GbrModel::read(const RegressorSpec& spec, std::size_t n_features, BinaryReader& in) {
  double initial = 0;
  std::vector<BoostStage> stages;
  read_payload(in, initial, stages);
  return std::make_unique<GbrModel>(spec, n_features, initial, std::move(stages));
}

std::unique_ptr<XgbModel> XgbModel::fit(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  spec.validate();
  const auto& p = std::get<XgbParams>(spec.params);
  require_training_shape(X, y, 2);
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);

  // Squared loss (y_hat - y)^2 / 2: gradient y_hat - y, unit hessian.
  const double f0 = (y.array() == y(0)).all() ? y(0) : y.mean();
  Eigen::VectorXd F = Eigen::VectorXd::Constant(X.rows(), f0);
  std::vector<double> grad(n), hess(n, 1.0);
  std::vector<BoostStage> stages;
  stages.reserve(p.estimators);
  const XgbTreeOptions options{p.max_depth, p.l1, p.l2, p.gamma, p.min_child_weight};
  for (std::size_t j = 0; j < p.estimators; ++j) {
    for (std::size_t i = 0; i < n; ++i) grad[i] = F(static_cast<Eigen::Index>(i)) - y(static_cast<Eigen::Index>(i));
    BoostStage stage{fit_xgb_tree(X, grad, hess, rows, options), p.learning_rate};
    F += stage.rate * stage.tree.predict(X);
    stages.push_back(std::move(stage));
  }
  return std::make_unique<XgbModel>(spec, static_cast<std::size_t>(X.cols()), f0, std::move(stages));
}

std::unique_ptr<XgbModel> XgbModel::read(const RegressorSpec& spec, std::size_t n_features, BinaryReader& in) {
  double initial = 0;
  std::vector<BoostStage> stages;
  read_payload(in, initial, stages);
  return std::make_unique<XgbModel>(spec, n_features, initial, std::move(stages));
}

}  // namespace tke
