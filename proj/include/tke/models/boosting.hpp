#pragma once

#include <vector>

#include "tke/models/regressor.hpp"
#include "tke/models/tree.hpp"

namespace tke {

struct BoostStage {
  DecisionTree tree;
  double rate = 0.0;
};

// F(x) = F0 + sum_j rate_j T_j(x). Shared by gradient boosting (least-squares
// trees on residuals) and the regularized second-order variant.
class BoostedModel : public Regressor {
 public:
  BoostedModel(RegressorSpec spec, std::size_t n_features, double initial, std::vector<BoostStage> stages);

  double initial() const { return initial_; }
  const std::vector<BoostStage>& stages() const { return stages_; }

  // Prediction after the first `count` stages.
  Eigen::VectorXd predict_staged(const Eigen::MatrixXd& X, std::size_t count) const;

  void write_payload(BinaryWriter& out) const override;

 protected:
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& X) const override;
  static void read_payload(BinaryReader& in, double& initial, std::vector<BoostStage>& stages);

 private:
  double initial_;
  std::vector<BoostStage> stages_;
};

class GbrModel final : public BoostedModel {
 public:
  using BoostedModel::BoostedModel;
  static std::unique_ptr<GbrModel> fit(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
  static std::unique_ptr<GbrModel> read(const RegressorSpec& spec, std::size_t n_features, BinaryReader& in);
};

class XgbModel final : public BoostedModel {
 public:
  using BoostedModel::BoostedModel;
  static std::unique_ptr<XgbModel> fit(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
  static std::unique_ptr<XgbModel> read(const RegressorSpec& spec, std::size_t n_features, BinaryReader& in);
};

}  // namespace tke
