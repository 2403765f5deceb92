#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tke/error.hpp"
#include "tke/models/boosting.hpp"
#include "tke/models/forest.hpp"
#include "tke/models/norms.hpp"
#include "tke/models/tree.hpp"

using namespace tke;

namespace {

std::vector<std::size_t> all_rows(Eigen::Index n) {
  std::vector<std::size_t> r(static_cast<std::size_t>(n));
  std::iota(r.begin(), r.end(), 0);
  return r;
}

struct Data {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

Data smooth(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Data d{Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(n), 8, [&] { return g(rng); }),
         Eigen::VectorXd(static_cast<Eigen::Index>(n))};
  for (Eigen::Index i = 0; i < d.X.rows(); ++i) d.y(i) = std::sin(d.X(i, 0)) + 0.5 * d.X(i, 1) * d.X(i, 2) + 0.05 * g(rng);
  return d;
}

template <typename P>
RegressorSpec spec_with(ModelKind kind, auto&& edit) {
  RegressorSpec s = RegressorSpec::defaults(kind, 5);
  edit(std::get<P>(s.params));
  return s;
}

}  // namespace

TEST_CASE("cart leaves on constant targets are exact") {
  const auto d = smooth(50, 1);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(50, 0.1 + 0.2);
  const auto tree = fit_cart(d.X, y, all_rows(50), {});
  CHECK(tree.leaf_count() == 1);
  CHECK(tree.predict(d.X).cwiseEqual(0.1 + 0.2).all());
}

TEST_CASE("cart splits at midpoints with lowest-feature tie-break") {
  Eigen::MatrixXd X(4, 2);
  X << 0, 0, 1, 1, 2, 2, 3, 3;  // both features give the same partitions
  Eigen::VectorXd y(4);
  y << 0, 0, 1, 1;
  const auto tree = fit_cart(X, y, all_rows(4), {});
  const auto& root = tree.nodes().front();
  CHECK(root.feature == 0);
  CHECK(root.threshold == 1.5);
  CHECK(tree.leaf_count() == 2);
  CHECK(tree.predict(X) == y);
}

TEST_CASE("cart respects depth and counts repeated rows") {
  const auto d = smooth(300, 2);
  for (std::size_t depth : {1u, 2u, 5u}) {
    CartOptions o;
    o.max_depth = depth;
    const auto tree = fit_cart(d.X, d.y, all_rows(300), o);
    CHECK(tree.depth() <= depth);
    CHECK(tree.leaf_count() <= (1u << depth));
  }
  // One row listed three times pulls its leaf mean.
  Eigen::MatrixXd X(2, 1);
  X << 0, 1;
  Eigen::VectorXd y(2);
  y << 0, 4;
  CartOptions stump;
  stump.max_depth = 0;
  const std::vector<std::size_t> rows{0, 1, 1, 1};
  CHECK(fit_cart(X, y, rows, stump).predict(X)(0) == 3.0);
}

TEST_CASE("identical trees average to the tree") {
  Eigen::MatrixXd X(3, 1);
  X << 0, 1, 2;
  Eigen::VectorXd y(3);
  y << 1, 1, 5;
  CartOptions o;
  o.max_depth = 1;
  const auto stump = fit_cart(X, y, all_rows(3), o);
  const auto spec = RegressorSpec::defaults(ModelKind::rf);
  const RfModel rf(spec, 1, std::vector<DecisionTree>(25, stump));
  CHECK(rf.predict(X) == stump.predict(X));
}

TEST_CASE("forest predictions lie within member predictions") {
  const auto d = smooth(200, 3);
  const auto spec = spec_with<ForestParams>(ModelKind::rf, [](ForestParams& p) {
    p.estimators = 15;
    p.max_depth = 6;
  });
  const auto rf = RfModel::fit(spec, d.X, d.y, 2);
  const auto q = smooth(60, 4).X;
  const Eigen::VectorXd p = rf->predict(q);
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(60, 1e300), hi = -lo;
  for (const auto& t : rf->trees()) {
    const Eigen::VectorXd tp = t.predict(q);
    lo = lo.cwiseMin(tp);
    hi = hi.cwiseMax(tp);
  }
  CHECK((p.array() >= lo.array() - 1e-12).all());
  CHECK((p.array() <= hi.array() + 1e-12).all());

  // Thread count never changes the model.
  const auto rf1 = RfModel::fit(spec, d.X, d.y, 1);
  const auto rf4 = RfModel::fit(spec, d.X, d.y, 4);
  REQUIRE(rf1->trees().size() == rf4->trees().size());
  for (std::size_t m = 0; m < rf1->trees().size(); ++m) CHECK(rf1->trees()[m] == rf4->trees()[m]);
  auto other = spec;
  other.seed = 6;
  CHECK(!(RfModel::fit(other, d.X, d.y, 1)->trees()[0] == rf1->trees()[0]));
}

TEST_CASE("single gbr stage with an exact tree") {
  const auto d = smooth(40, 5);
  const auto spec = spec_with<GbrParams>(ModelKind::gbr, [](GbrParams& p) {
    p.estimators = 1;
    p.learning_rate = 0.2;
    p.max_depth = 64;
  });
  const auto m = GbrModel::fit(spec, d.X, d.y);
  const double f0 = d.y.mean();
  CHECK(m->initial() == doctest::Approx(f0).epsilon(1e-15));
  const Eigen::VectorXd expect = f0 + 0.2 * (d.y.array() - f0);
  CHECK((m->predict(d.X) - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("gbr training error never rises across stages") {
  const auto d = smooth(250, 6);
  const auto spec = spec_with<GbrParams>(ModelKind::gbr, [](GbrParams& p) { p.estimators = 60; });
  const auto m = GbrModel::fit(spec, d.X, d.y);
  double prev = 1e300;
  for (std::size_t j = 0; j <= m->stages().size(); ++j) {
    const double e = (m->predict_staged(d.X, j) - d.y).squaredNorm() / 250.0;
    CHECK(e <= prev + 1e-12);
    prev = e;
  }
}

TEST_CASE("xgb leaf weight closed form") {
  CHECK(xgb_leaf_weight(-10, 4, 1, 1.5) == doctest::Approx(9.0 / 5.5).epsilon(1e-15));
  CHECK(xgb_leaf_weight(-6, 3, 0, 0) == 2.0);
  CHECK(xgb_leaf_weight(0.7, 3, 1, 1.5) == 0.0);
  CHECK(xgb_leaf_weight(-1.0, 3, 1, 1.5) == 0.0);
  CHECK(soft_threshold(-3.0, 1.0) == -2.0);
  CHECK(soft_threshold(0.5, 1.0) == 0.0);

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> G(-20, 20), H(0, 10), L(0, 5);
  for (int t = 0; t < 200; ++t) {
    const double g = G(rng), h = H(rng), l1 = L(rng), l2 = L(rng) + 1e-3;
    const double w = xgb_leaf_weight(g, h, l1, l2);
    const double best = xgb_leaf_objective(w, g, h, l1, l2);
    const double span = std::max(1.0, 4 * std::abs(w));
    for (int k = 0; k <= 10000; ++k) {
      const double v = w - span + 2 * span * k / 10000.0;
      CHECK(xgb_leaf_objective(v, g, h, l1, l2) >= best - 1e-9);
    }
  }
}

TEST_CASE("xgb tree leaves use the closed form") {
  Eigen::MatrixXd X(6, 1);
  X << 0, 0.1, 0.2, 5, 5.1, 5.2;
  const std::vector<double> grad{-3, -2, -4, 6, 5, 7};
  const std::vector<double> hess(6, 1.0);
  XgbTreeOptions o;
  o.max_depth = 1;
  const auto tree = fit_xgb_tree(X, grad, hess, all_rows(6), o);
  REQUIRE(tree.leaf_count() == 2);
  const Eigen::VectorXd p = tree.predict(X);
  CHECK(p(0) == doctest::Approx(xgb_leaf_weight(-9, 3, 1.0, 1.5)));
  CHECK(p(5) == doctest::Approx(xgb_leaf_weight(18, 3, 1.0, 1.5)));

  // A large gamma refuses the split.
  o.gamma = 1e6;
  CHECK(fit_xgb_tree(X, grad, hess, all_rows(6), o).leaf_count() == 1);
}

TEST_CASE("boosted models reproduce constant targets exactly") {
  const auto d = smooth(30, 7);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(30, 0.7);
  const auto q = smooth(10, 8).X;
  for (ModelKind k : {ModelKind::gbr, ModelKind::xgb}) {
    auto spec = RegressorSpec::defaults(k);
    const auto m = fit(spec, d.X, y);
    CHECK(m->predict(q).cwiseEqual(0.7).all());
  }
  const auto rf = fit(RegressorSpec::defaults(ModelKind::rf), d.X, y);
  CHECK(rf->predict(q).cwiseEqual(0.7).all());
}

TEST_CASE("tree structure is seed deterministic") {
  const auto d = smooth(150, 9);
  for (ModelKind k : {ModelKind::gbr, ModelKind::xgb}) {
    auto spec = RegressorSpec::defaults(k);
    const auto a = fit(spec, d.X, d.y);
    const auto b = fit(spec, d.X, d.y);
    const auto& sa = dynamic_cast<const BoostedModel&>(*a).stages();
    const auto& sb = dynamic_cast<const BoostedModel&>(*b).stages();
    REQUIRE(sa.size() == sb.size());
    for (std::size_t j = 0; j < sa.size(); ++j) CHECK(sa[j].tree == sb[j].tree);
  }
}
