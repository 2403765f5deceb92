#pragma once

#include <span>

#include "tke/models/regressor.hpp"

namespace tke {

// Euclidean distance in standardized feature space.
double knn_distance(std::span<const double> a, std::span<const double> b);

class KnnModel final : public Regressor {
 public:
  KnnModel(RegressorSpec spec, Eigen::MatrixXd X, Eigen::VectorXd y);

  static std::unique_ptr<KnnModel> fit(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
  static std::unique_ptr<KnnModel> read(const RegressorSpec& spec, BinaryReader& in);

  void write_payload(BinaryWriter& out) const override;
  const KnnParams& params() const { return std::get<KnnParams>(spec().params); }

 protected:
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& X) const override;

 private:
  // Row-major copy so each training point is contiguous.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> X_;
  Eigen::VectorXd y_;
};

}  // namespace tke
