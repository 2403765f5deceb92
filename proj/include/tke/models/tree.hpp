#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace tke {

class BinaryWriter;
class BinaryReader;

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;         // leaf output
  std::uint32_t depth = 0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict_row(const Eigen::MatrixXd& X, Eigen::Index row) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t depth() const;
  std::size_t leaf_count() const;

  void write(BinaryWriter& out) const;
  static DecisionTree read(BinaryReader& in);

  bool operator==(const DecisionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
};

struct CartOptions {
  std::size_t max_depth = 10;
  std::size_t min_samples_split = 2;
  std::size_t max_features = 0;  // 0 or >= d: all features
  std::uint64_t seed = 0;        // feature subsampling only
};

// Least-squares regression tree on the listed rows; a row listed twice counts
// twice (bootstrap samples). Splits pick the largest squared-error reduction,
// ties going to the lowest feature index and then the smallest threshold.
DecisionTree fit_cart(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const std::size_t> rows,
                      const CartOptions& options);

struct XgbTreeOptions {
  std::size_t max_depth = 10;
  double l1 = 1.0;
  double l2 = 1.5;
  double gamma = 0.0;
  double min_child_weight = 1.0;
};

// -soft_threshold(G, l1) / (H + l2): minimizer of the per-leaf objective
// G w + (H + l2) w^2 / 2 + l1 |w|.
double xgb_leaf_weight(double G, double H, double l1, double l2);
double xgb_leaf_objective(double w, double G, double H, double l1, double l2);

// Second-order tree on per-row gradients and hessians.
DecisionTree fit_xgb_tree(const Eigen::MatrixXd& X, std::span<const double> grad, std::span<const double> hess,
                          std::span<const std::size_t> rows, const XgbTreeOptions& options);

}  // namespace tke
