#pragma once

#include <vector>

#include "tke/models/regressor.hpp"
#include "tke/models/tree.hpp"

namespace tke {

// Bootstrap-aggregated regression trees; the prediction is the plain average
// of the member trees.
class RfModel final : public Regressor {
 public:
  RfModel(RegressorSpec spec, std::size_t n_features, std::vector<DecisionTree> trees);

  static std::unique_ptr<RfModel> fit(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      std::size_t threads = 1);
  static std::unique_ptr<RfModel> read(const RegressorSpec& spec, std::size_t n_features, BinaryReader& in);

  const std::vector<DecisionTree>& trees() const { return trees_; }
  void write_payload(BinaryWriter& out) const override;

 protected:
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& X) const override;

 private:
  std::vector<DecisionTree> trees_;
};

}  // namespace tke
