#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "tke/error.hpp"
#include "tke/models/model_io.hpp"
#include "tke/stats.hpp"

using namespace tke;

namespace {

RegressorSpec small_spec(ModelKind k) {
  RegressorSpec s = RegressorSpec::defaults(k, 3);
  std::visit(
      [](auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ForestParams> || std::is_same_v<P, XgbParams>) {
          p.estimators = 10;
          p.max_depth = 4;
        } else if constexpr (std::is_same_v<P, GbrParams>) {
          p.estimators = 10;
        } else if constexpr (std::is_same_v<P, GprParams>) {
          p.restarts = 1;
          p.max_iterations = 5;
        } else if constexpr (std::is_same_v<P, MlpParams>) {
          p.epochs = 3;
        }
      },
      s.params);
  return s;
}

struct Linear {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

Linear linear(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Linear d{Eigen::MatrixXd::NullaryExpr(n, 8, [&] { return g(rng); }), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) d.y(i) = 3 * d.X(i, 0) + 0.01 * g(rng);
  return d;
}

std::vector<double> as_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_CASE("every kind survives a save and load") {
  std::mt19937_64 rng(1);
  const auto d = linear(120, rng);
  const auto q = linear(30, rng).X;
  for (ModelKind k : kAllModelKinds) {
    const std::string kind_name(to_string(k));
    CAPTURE(kind_name);
    const auto spec = small_spec(k);
    const auto m = fit(spec, d.X, d.y);
    std::stringstream buf;
    save_model(buf, *m);
    const auto back = load_model(buf);
    CHECK(back->kind() == k);
    CHECK(back->n_features() == 8);
    CHECK(to_json(back->spec()) == to_json(spec));
    CHECK(back->spec().seed == spec.seed);
    CHECK(back->predict(q) == m->predict(q));

    // Writing the reloaded model gives the same bytes.
    std::stringstream again;
    save_model(again, *back);
    CHECK(again.str() == buf.str());
  }
}

TEST_CASE("file round trip") {
  std::mt19937_64 rng(2);
  const auto d = linear(60, rng);
  const auto m = fit(small_spec(ModelKind::rf), d.X, d.y);
  const auto path = std::filesystem::temp_directory_path() / "tke_model_io_test.bin";
  save_model(path, *m);
  CHECK(load_model(path)->predict(d.X) == m->predict(d.X));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_model(path), Error);
}

TEST_CASE("corrupt containers are rejected") {
  std::mt19937_64 rng(3);
  const auto d = linear(40, rng);
  std::stringstream buf;
  save_model(buf, *fit(small_spec(ModelKind::knn), d.X, d.y));
  const std::string good = buf.str();

  auto code = [](const std::string& bytes) {
    std::stringstream in(bytes);
    try {
      load_model(in);
    } catch (const Error& e) {
      return e.code();
    }
    FAIL("expected a load failure");
    return ErrorCode::io;
  };
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(code(bad_magic) == ErrorCode::parse);
  std::string bad_version = good;
  bad_version[8] = static_cast<char>(kModelFormatVersion + 1);
  CHECK(code(bad_version) == ErrorCode::parse);
  CHECK(code(good.substr(0, good.size() / 2)) == ErrorCode::parse);
  CHECK(code("") == ErrorCode::parse);
}

TEST_CASE("every kind fits a noisy linear target") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Eigen::MatrixXd X(500, 1);
  Eigen::VectorXd y(500);
  for (Eigen::Index i = 0; i < 500; ++i) {
    X(i, 0) = g(rng);
    y(i) = 3 * X(i, 0) + 0.01 * g(rng);
  }
  const Eigen::MatrixXd Xtr = X.topRows(400), Xte = X.bottomRows(100);
  const Eigen::VectorXd ytr = y.head(400), yte = y.tail(100);
  for (ModelKind k : kAllModelKinds) {
    const std::string kind_name(to_string(k));
    CAPTURE(kind_name);
    const auto m = fit(RegressorSpec::defaults(k), Xtr, ytr);
    CHECK(r_squared(as_vec(yte), as_vec(m->predict(Xte))) >= 0.95);
  }
}

TEST_CASE("linear target among seven distractor columns") {
  std::mt19937_64 rng(4);
  const auto train = linear(400, rng);
  const auto test = linear(100, rng);
  for (ModelKind k : kAllModelKinds) {
    const std::string kind_name(to_string(k));
    CAPTURE(kind_name);
    const auto m = fit(RegressorSpec::defaults(k), train.X, train.y);
    const double r2 = r_squared(as_vec(test.y), as_vec(m->predict(test.X)));
    // Three neighbors in eight unit-variance dimensions average over the
    // distractors too; that caps knn near 0.8 at this size.
    CHECK(r2 >= (k == ModelKind::knn ? 0.75 : 0.95));
  }
}

TEST_CASE("constant targets come back exactly") {
  std::mt19937_64 rng(5);
  const auto d = linear(50, rng);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(50, -1.3);
  const auto q = linear(10, rng).X;
  for (ModelKind k : {ModelKind::knn, ModelKind::rf, ModelKind::gbr, ModelKind::xgb, ModelKind::gpr}) {
    const std::string kind_name(to_string(k));
    CAPTURE(kind_name);
    const auto m = fit(small_spec(k), d.X, y);
    CHECK((m->predict(q).array() + 1.3).abs().maxCoeff() <= 1e-12);
  }
}
