#include "tke/models/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "tke/error.hpp"
#include "tke/models/model_io.hpp"
#include "tke/models/norms.hpp"

namespace tke {

double DecisionTree::predict_row(const Eigen::MatrixXd& X, Eigen::Index row) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& n = nodes_[i];
    i = static_cast<std::size_t>(X(row, n.feature) <= n.threshold ? n.left : n.right);
  }
  return nodes_[i].value;
}

Eigen::VectorXd DecisionTree::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) out(r) = predict_row(X, r);
  return out;
}

std::size_t DecisionTree::depth() const {
  std::size_t d = 0;
  for (const auto& n : nodes_) d = std::max<std::size_t>(d, n.depth);
  return d;
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

void DecisionTree::write(BinaryWriter& out) const {
  out.put<std::uint64_t>(nodes_.size());
  for (const auto& n : nodes_) {
    out.put(n.feature);
    out.put(n.threshold);
    out.put(n.left);
    out.put(n.right);
    out.put(n.value);
    out.put(n.depth);
  }
}

DecisionTree DecisionTree::read(BinaryReader& in) {
  const auto count = in.get<std::uint64_t>();
  if (count == 0 || count > (1ULL << 32)) throw Error(ErrorCode::parse, "model file: bad tree node count");
  std::vector<TreeNode> nodes(count);
  for (auto& n : nodes) {
    n.feature = in.get<std::int32_t>();
    n.threshold = in.get<double>();
    n.left = in.get<std::int32_t>();
    n.right = in.get<std::int32_t>();
    n.value = in.get<double>();
    n.depth = in.get<std::uint32_t>();
  }
  for (const auto& n : nodes) {
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || static_cast<std::uint64_t>(std::max(n.left, n.right)) >= count)) {
      throw Error(ErrorCode::parse, "model file: dangling tree child");
    }
  }
  return DecisionTree(std::move(nodes));
}

namespace {

struct SplitChoice {
  bool found = false;
  std::int32_t feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Scans every candidate threshold of the given features. `gain` receives the
// left/right (sum g, sum h) totals; `admissible` gates child sizes.
template <typename Gain, typename Admissible>
SplitChoice best_split(const Eigen::MatrixXd& X, std::span<const std::size_t> rows, std::span<const std::size_t> features,
                       std::span<const double> g, std::span<const double> h, Gain gain, Admissible admissible) {
  SplitChoice best;
  double G = 0, H = 0;
  for (std::size_t r : rows) {
    G += g[r];
    H += h[r];
  }
  std::vector<std::size_t> sorted(rows.begin(), rows.end());
  for (std::size_t f : features) {
    const auto col = static_cast<Eigen::Index>(f);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&](std::size_t a, std::size_t b) { return X(static_cast<Eigen::Index>(a), col) < X(static_cast<Eigen::Index>(b), col); });
    double GL = 0, HL = 0;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
      GL += g[sorted[i]];
      HL += h[sorted[i]];
      const double a = X(static_cast<Eigen::Index>(sorted[i]), col);
      const double b = X(static_cast<Eigen::Index>(sorted[i + 1]), col);
      if (a == b) continue;
      const double GR = G - GL, HR = H - HL;
      if (!admissible(HL, HR)) continue;
      const double value = gain(GL, HL, GR, HR, G, H);
      if (value > best.gain) {
        double threshold = 0.5 * (a + b);
        if (!(threshold < b)) threshold = a;
        best = {true, static_cast<std::int32_t>(f), threshold, value};
      }
    }
  }
  return best;
}

// Partitions rows in place around the split; returns the left count.
std::size_t partition_rows(const Eigen::MatrixXd& X, std::vector<std::size_t>& rows, const SplitChoice& s) {
  const auto mid = std::stable_partition(rows.begin(), rows.end(), [&](std::size_t r) {
    return X(static_cast<Eigen::Index>(r), s.feature) <= s.threshold;
  });
  return static_cast<std::size_t>(mid - rows.begin());
}

class CartBuilder {
 public:
  CartBuilder(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const CartOptions& o)
      : X_(X), y_(y.data(), static_cast<std::size_t>(y.size())), ones_(static_cast<std::size_t>(y.size()), 1.0), o_(o),
        rng_(o.seed) {
    const auto d = static_cast<std::size_t>(X.cols());
    all_features_.resize(d);
    std::iota(all_features_.begin(), all_features_.end(), 0);
    per_split_ = (o.max_features == 0 || o.max_features >= d) ? d : o.max_features;
  }

  std::int32_t build(std::vector<std::size_t> rows, std::uint32_t depth) {
    const auto index = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({});
    nodes_[static_cast<std::size_t>(index)].depth = depth;

    double sum = 0;
    bool constant = true;
    for (std::size_t r : rows) {
      sum += y_[r];
      constant = constant && y_[r] == y_[rows.front()];
    }
    const double leaf = constant ? y_[rows.front()] : sum / static_cast<double>(rows.size());
    nodes_[static_cast<std::size_t>(index)].value = leaf;
    if (constant || depth >= o_.max_depth || rows.size() < std::max<std::size_t>(o_.min_samples_split, 2)) return index;

    const auto split = best_split(
        X_, rows, choose_features(), y_, ones_,
        [](double GL, double HL, double GR, double HR, double G, double H) {
          return GL * GL / HL + GR * GR / HR - G * G / H;
        },
        [](double HL, double HR) { return HL >= 1 && HR >= 1; });
    if (!split.found) return index;

    const std::size_t n_left = partition_rows(X_, rows, split);
    std::vector<std::size_t> right(rows.begin() + static_cast<std::ptrdiff_t>(n_left), rows.end());
    rows.resize(n_left);
    const auto l = build(std::move(rows), depth + 1);
    const auto r = build(std::move(right), depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(index)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return index;
  }

  std::vector<TreeNode> take() { return std::move(nodes_); }

 private:
  std::vector<std::size_t> choose_features() {
    if (per_split_ == all_features_.size()) return all_features_;
    std::vector<std::size_t> pool = all_features_;
    for (std::size_t i = 0; i < per_split_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng_)]);
    }
    pool.resize(per_split_);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  const Eigen::MatrixXd& X_;
  std::span<const double> y_;
  std::vector<double> ones_;
  CartOptions o_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> all_features_;
  std::size_t per_split_ = 0;
  std::vector<TreeNode> nodes_;
};

class XgbBuilder {
 public:
  XgbBuilder(const Eigen::MatrixXd& X, std::span<const double> g, std::span<const double> h, const XgbTreeOptions& o)
      : X_(X), g_(g), h_(h), o_(o) {
    features_.resize(static_cast<std::size_t>(X.cols()));
    std::iota(features_.begin(), features_.end(), 0);
  }

  std::int32_t build(std::vector<std::size_t> rows, std::uint32_t depth) {
    const auto index = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({});
    double G = 0, H = 0;
    for (std::size_t r : rows) {
      G += g_[r];
      H += h_[r];
    }
    nodes_[static_cast<std::size_t>(index)].depth = depth;
    nodes_[static_cast<std::size_t>(index)].value = xgb_leaf_weight(G, H, o_.l1, o_.l2);
    if (depth >= o_.max_depth || rows.size() < 2) return index;

    const double l1 = o_.l1, l2 = o_.l2, gamma = o_.gamma, mcw = o_.min_child_weight;
    auto score = [=](double g, double h) {
      const double t = soft_threshold(g, l1);
      return t * t / (h + l2);
    };
    const auto split = best_split(
        X_, rows, features_, g_, h_,
        [=](double GL, double HL, double GR, double HR, double Gp, double Hp) {
          return 0.5 * (score(GL, HL) + score(GR, HR) - score(Gp, Hp)) - gamma;
        },
        [=](double HL, double HR) { return HL >= mcw && HR >= mcw; });
    if (!split.found) return index;

    const std::size_t n_left = partition_rows(X_, rows, split);
    std::vector<std::size_t> right(rows.begin() + static_cast<std::ptrdiff_t>(n_left), rows.end());
    rows.resize(n_left);
    const auto l = build(std::move(rows), depth + 1);
    const auto r = build(std::move(right), depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(index)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return index;
  }

  std::vector<TreeNode> take() { return std::move(nodes_); }

 private:
  const Eigen::MatrixXd& X_;
  std::span<const double> g_, h_;
  XgbTreeOptions o_;
  std::vector<std::size_t> features_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

DecisionTree fit_cart(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const std::size_t> rows,
                      const CartOptions& options) {
  if (rows.empty()) throw Error(ErrorCode::empty_input, "fit_cart: no rows");
  if (X.rows() != y.size()) throw Error(ErrorCode::shape, "fit_cart: X/y row mismatch");
  CartBuilder builder(X, y, options);
  builder.build({rows.begin(), rows.end()}, 0);
  return DecisionTree(builder.take());
}

double xgb_leaf_weight(double G, double H, double l1, double l2) {
  const double denom = H + l2;
  if (denom <= 0) return 0.0;
  return -soft_threshold(G, l1) / denom;
}

double xgb_leaf_objective(double w, double G, double H, double l1, double l2) {
  return G * w + 0.5 * (H + l2) * w * w + l1 * std::abs(w);
}

DecisionTree fit_xgb_tree(const Eigen::MatrixXd& X, std::span<const double> grad, std::span<const double> hess,
                          std::span<const std::size_t> rows, const XgbTreeOptions& options) {
  if (rows.empty()) throw Error(ErrorCode::empty_input, "fit_xgb_tree: no rows");
  if (grad.size() != static_cast<std::size_t>(X.rows()) || hess.size() != grad.size()) {
    throw Error(ErrorCode::shape, "fit_xgb_tree: gradient length differs from row count");
  }
  XgbBuilder builder(X, grad, hess, options);
  builder.build({rows.begin(), rows.end()}, 0);
  return DecisionTree(builder.take());
}

}  // namespace tke
