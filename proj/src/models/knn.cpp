#include "tke/models/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "tke/error.hpp"
#include "tke/models/model_io.hpp"

namespace tke {

double knn_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::shape, "knn_distance: dimension mismatch");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

KnnModel::KnnModel(RegressorSpec spec, Eigen::MatrixXd X, Eigen::VectorXd y)
    : Regressor(std::move(spec), static_cast<std::size_t>(X.cols())), X_(std::move(X)), y_(std::move(y)) {}

std::unique_ptr<KnnModel> KnnModel::fit(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  spec.validate();
  const auto& p = std::get<KnnParams>(spec.params);
  require_training_shape(X, y, 1);
  if (p.k > static_cast<std::size_t>(X.rows())) {
    throw Error(ErrorCode::parameter, "knn: k = " + std::to_string(p.k) + " exceeds " + std::to_string(X.rows()) +
                                          " training rows");
  }
  return std::make_unique<KnnModel>(spec, X, y);
}

Eigen::VectorXd KnnModel::predict_rows(const Eigen::MatrixXd& X) const {
  const auto& p = params();
  const auto n = static_cast<std::size_t>(X_.rows());
  const auto d = static_cast<std::size_t>(X_.cols());
  Eigen::VectorXd out(X.rows());
  std::vector<std::pair<double, std::size_t>> dist(n);
  std::vector<double> query(d);
  for (Eigen::Index q = 0; q < X.rows(); ++q) {
    for (std::size_t c = 0; c < d; ++c) query[c] = X(q, static_cast<Eigen::Index>(c));
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = X_.data() + i * d;
      double s = 0;
      for (std::size_t c = 0; c < d; ++c) s += (row[c] - query[c]) * (row[c] - query[c]);
      dist[i] = {s, i};
    }
    // Equal distances resolve to the lower training index.
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(p.k), dist.end());

    if (dist[0].first == 0.0) {
      double sum = 0;
      std::size_t count = 0;
      for (std::size_t j = 0; j < p.k && dist[j].first == 0.0; ++j, ++count) sum += y_(static_cast<Eigen::Index>(dist[j].second));
      out(q) = sum / static_cast<double>(count);
      continue;
    }
    double num = 0, den = 0;
    for (std::size_t j = 0; j < p.k; ++j) {
      const double w = p.weighting == KnnWeighting::uniform ? 1.0 : 1.0 / std::sqrt(dist[j].first);
      num += w * y_(static_cast<Eigen::Index>(dist[j].second));
      den += w;
    }
    out(q) = num / den;
  }
  return out;
}

void KnnModel::write_payload(BinaryWriter& out) const {
  out.put_matrix(Eigen::MatrixXd(X_));
  out.put_vector(y_);
}

std::unique_ptr<KnnModel> KnnModel::read(const RegressorSpec& spec, BinaryReader& in) {
  Eigen::MatrixXd X = in.get_matrix();
  Eigen::VectorXd y = in.get_vector();
  return std::make_unique<KnnModel>(spec, std::move(X), std::move(y));
}

}  // namespace tke
