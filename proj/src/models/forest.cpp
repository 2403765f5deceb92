#include "tke/models/forest.hpp"

#include <numeric>
#include <random>

#include "tke/error.hpp"
#include "tke/models/model_io.hpp"
#include "tke/parallel.hpp"

namespace tke {

RfModel::RfModel(RegressorSpec spec, std::size_t n_features, std::vector<DecisionTree> trees)
    : Regressor(std::move(spec), n_features), trees_(std::move(trees)) {}

std::unique_ptr<RfModel> RfModel::fit(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                      std::size_t threads) {
  spec.validate();
  const auto& p = std::get<ForestParams>(spec.params);
  require_training_shape(X, y, 2);
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<DecisionTree> trees(p.estimators);
  parallel_for(p.estimators, threads, [&](std::size_t m) {
    const std::uint64_t seed = derive_seed(spec.seed, m);
    std::vector<std::size_t> rows(n);
    if (p.bootstrap) {
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    CartOptions options{p.max_depth, p.min_samples_split, p.max_features, derive_seed(seed, 1)};
    trees[m] = fit_cart(X, y, rows, options);
  });
  return std::make_unique<RfModel>(spec, static_cast<std::size_t>(X.cols()), std::move(trees));
}

Eigen::VectorXd RfModel::predict_rows(const Eigen::MatrixXd& X) const {
  // Running mean: exact when every tree agrees.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(X.rows());
  double count = 0;
  for (const auto& t : trees_) mean += (t.predict(X) - mean) / ++count;
  return mean;
}

void RfModel::write_payload(BinaryWriter& out) const {
  out.put<std::uint64_t>(trees_.size());
  for (const auto& t : trees_) t.write(out);
}

std::unique_ptr<RfModel> RfModel::read(const RegressorSpec& spec, std::size_t n_features, BinaryReader& in) {
  const auto count = in.get<std::uint64_t>();
  if (count == 0 || count > 1000000) throw Error(ErrorCode::parse, "model file: bad tree count");
  std::vector<DecisionTree> trees;
  trees.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) trees.push_back(DecisionTree::read(in));
  return std::make_unique<RfModel>(spec, n_features, std::move(trees));
}

}  // namespace tke
