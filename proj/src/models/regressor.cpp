#include "tke/models/regressor.hpp"

#include <cmath>
#include <set>

#include "tke/error.hpp"
#include "tke/models/boosting.hpp"
#include "tke/models/forest.hpp"
#include "tke/models/gpr.hpp"
#include "tke/models/knn.hpp"
#include "tke/models/mlp.hpp"

namespace tke {

using nlohmann::json;

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::knn: return "knn";
    case ModelKind::rf: return "rf";
    case ModelKind::gbr: return "gbr";
    case ModelKind::xgb: return "xgb";
    case ModelKind::gpr: return "gpr";
    case ModelKind::mlp: return "mlp";
  }
  return "unknown";
}

ModelKind model_kind_from_string(std::string_view name) {
  for (ModelKind k : kAllModelKinds) {
    if (to_string(k) == name) return k;
  }
  if (name == "dnn") return ModelKind::mlp;
  if (name == "rfr") return ModelKind::rf;
  throw Error(ErrorCode::parameter, "unknown model kind '" + std::string(name) + "'");
}

RegressorSpec RegressorSpec::defaults(ModelKind kind, std::uint64_t seed) {
  RegressorSpec s;
  s.kind = kind;
  s.seed = seed;
  switch (kind) {
    case ModelKind::knn: s.params = KnnParams{}; break;
    case ModelKind::rf: s.params = ForestParams{}; break;
    case ModelKind::gbr: s.params = GbrParams{}; break;
    case ModelKind::xgb: s.params = XgbParams{}; break;
    case ModelKind::gpr: s.params = GprParams{}; break;
    case ModelKind::mlp: s.params = MlpParams{}; break;
  }
  return s;
}

namespace {

void require(bool ok, ModelKind kind, const std::string& what) {
  if (!ok) throw Error(ErrorCode::parameter, std::string(to_string(kind)) + ": " + what);
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0; }
bool finite_non_negative(double v) { return std::isfinite(v) && v >= 0; }

void check_hyper(const Hyper& h, ModelKind kind, const char* name) {
  require(finite_positive(h.lower) && finite_positive(h.upper) && h.lower <= h.upper, kind,
          std::string(name) + " bounds must satisfy 0 < lower <= upper");
  require(finite_positive(h.value), kind, std::string(name) + " must be positive");
}

constexpr std::size_t kind_index(ModelKind k) {
  switch (k) {
    case ModelKind::knn: return 0;
    case ModelKind::rf: return 1;
    case ModelKind::gbr: return 2;
    case ModelKind::xgb: return 3;
    case ModelKind::gpr: return 4;
    case ModelKind::mlp: return 5;
  }
  return 0;
}

// Reads known keys, rejecting anything else so sweep typos fail loudly.
class KeyReader {
 public:
  KeyReader(const json& j, ModelKind kind) : j_(j), kind_(kind) {
    if (!j.is_object()) throw Error(ErrorCode::parameter, std::string(to_string(kind)) + ": parameters must be an object");
  }
  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parameter, std::string(to_string(kind_)) + "." + key + ": " + e.what());
    }
  }
  void read_size(const char* key, std::size_t& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw Error(ErrorCode::parameter, std::string(to_string(kind_)) + "." + key + " must be a non-negative integer");
    }
    out = v.get<std::size_t>();
  }
  void read_hyper(const char* key, Hyper& h) {
    read(key, h.value);
    const std::string bounds = std::string(key) + "_bounds";
    seen_.insert(bounds);
    if (j_.contains(bounds)) {
      const auto& b = j_.at(bounds);
      if (b.is_string() && b.get<std::string>() == "fixed") {
        h.lower = h.upper = h.value;
      } else if (b.is_array() && b.size() == 2) {
        h.lower = b[0].get<double>();
        h.upper = b[1].get<double>();
      } else {
        throw Error(ErrorCode::parameter, std::string(to_string(kind_)) + "." + bounds + " must be [lo, hi] or \"fixed\"");
      }
    }
  }
  void mark(const char* key) { seen_.insert(key); }
  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw Error(ErrorCode::parameter, std::string(to_string(kind_)) + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  ModelKind kind_;
  std::set<std::string> seen_;
};

json hyper_bounds(const Hyper& h) { return json::array({h.lower, h.upper}); }

}  // namespace

void RegressorSpec::validate() const {
  require(params.index() == kind_index(kind), kind, "parameter set does not match model kind");
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, KnnParams>) {
          require(p.k >= 1, kind, "k must be >= 1");
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          require(p.estimators >= 1 && p.max_depth >= 1 && p.min_samples_split >= 2, kind,
                  "estimators and depth must be >= 1, min_split >= 2");
        } else if constexpr (std::is_same_v<P, GbrParams>) {
          require(p.estimators >= 1 && p.max_depth >= 1 && p.min_samples_split >= 2, kind,
                  "estimators and depth must be >= 1, min_split >= 2");
          require(finite_positive(p.learning_rate), kind, "learning_rate must be > 0");
        } else if constexpr (std::is_same_v<P, XgbParams>) {
          require(p.estimators >= 1 && p.max_depth >= 1, kind, "estimators and depth must be >= 1");
          require(finite_positive(p.learning_rate), kind, "learning_rate must be > 0");
          require(finite_non_negative(p.l1) && finite_non_negative(p.l2) && finite_non_negative(p.gamma) &&
                      finite_non_negative(p.min_child_weight),
                  kind, "l1, l2, gamma and min_child_weight must be >= 0");
        } else if constexpr (std::is_same_v<P, GprParams>) {
          check_hyper(p.rbf_length_scale, kind, "rbf_length_scale");
          check_hyper(p.white_noise, kind, "white_noise");
          check_hyper(p.rq_length_scale, kind, "rq_length_scale");
          check_hyper(p.rq_alpha, kind, "rq_alpha");
          require(finite_non_negative(p.alpha), kind, "alpha must be >= 0");
          require(p.restarts >= 1 && p.max_points >= 2 && p.optimize_points >= 2, kind,
                  "restarts >= 1, max_points and optimize_points >= 2");
        } else if constexpr (std::is_same_v<P, MlpParams>) {
          require(!p.hidden.empty(), kind, "at least one hidden layer");
          for (std::size_t w : p.hidden) require(w >= 1, kind, "hidden widths must be >= 1");
          // A zero rate is allowed: it freezes the parameters.
          require(finite_non_negative(p.learning_rate), kind, "learning_rate must be >= 0");
          require(p.beta1 >= 0 && p.beta1 < 1 && p.beta2 >= 0 && p.beta2 < 1 && p.epsilon > 0, kind,
                  "Adam decay rates must lie in [0, 1) and epsilon > 0");
          require(finite_non_negative(p.l1), kind, "l1 must be >= 0");
          require(p.batch >= 1 && p.epochs >= 1 && p.patience >= 1, kind, "batch, epochs and patience must be >= 1");
        }
      },
      params);
}

json to_json(const RegressorSpec& spec) {
  json body = std::visit(
      [](const auto& p) -> json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, KnnParams>) {
          return {{"neighbors", p.k}, {"weights", p.weighting == KnnWeighting::uniform ? "uniform" : "distance"}};
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          return {{"estimators", p.estimators}, {"depth", p.max_depth}, {"min_split", p.min_samples_split},
                  {"max_features", p.max_features}, {"bootstrap", p.bootstrap}};
        } else if constexpr (std::is_same_v<P, GbrParams>) {
          return {{"estimators", p.estimators}, {"learning_rate", p.learning_rate}, {"depth", p.max_depth},
                  {"min_split", p.min_samples_split}};
        } else if constexpr (std::is_same_v<P, XgbParams>) {
          return {{"estimators", p.estimators}, {"depth", p.max_depth}, {"learning_rate", p.learning_rate},
                  {"l1", p.l1}, {"l2", p.l2}, {"gamma", p.gamma}, {"min_child_weight", p.min_child_weight}};
        } else if constexpr (std::is_same_v<P, GprParams>) {
          return {{"rbf_length_scale", p.rbf_length_scale.value},
                  {"rbf_length_scale_bounds", hyper_bounds(p.rbf_length_scale)},
                  {"white_noise", p.white_noise.value},
                  {"white_noise_bounds", hyper_bounds(p.white_noise)},
                  {"rq_length_scale", p.rq_length_scale.value},
                  {"rq_length_scale_bounds", hyper_bounds(p.rq_length_scale)},
                  {"rq_alpha", p.rq_alpha.value},
                  {"rq_alpha_bounds", hyper_bounds(p.rq_alpha)},
                  {"alpha", p.alpha},
                  {"restarts", p.restarts},
                  {"max_iterations", p.max_iterations},
                  {"max_points", p.max_points},
                  {"optimize_points", p.optimize_points},
                  {"optimize", p.optimize}};
        } else {
          return {{"hidden", p.hidden},       {"learning_rate", p.learning_rate},
                  {"beta1", p.beta1},         {"beta2", p.beta2},
                  {"epsilon", p.epsilon},     {"l1", p.l1},
                  {"batch", p.batch},         {"epochs", p.epochs},
                  {"patience", p.patience},
                  {"activation", p.activation == MlpActivation::relu ? "relu" : "paper_softmax"}};
        }
      },
      spec.params);
  return json{{std::string(to_string(spec.kind)), body}};
}

RegressorSpec spec_from_json(ModelKind kind, const json& j, std::uint64_t seed) {
  RegressorSpec spec = RegressorSpec::defaults(kind, seed);
  KeyReader r(j, kind);
  std::visit(
      [&](auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, KnnParams>) {
          r.read_size("neighbors", p.k);
          std::string weights = p.weighting == KnnWeighting::uniform ? "uniform" : "distance";
          r.read("weights", weights);
          if (weights == "uniform") {
            p.weighting = KnnWeighting::uniform;
          } else if (weights == "distance") {
            p.weighting = KnnWeighting::inverse_distance;
          } else {
            throw Error(ErrorCode::parameter, "knn.weights must be \"uniform\" or \"distance\"");
          }
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          r.read_size("estimators", p.estimators);
          r.read_size("depth", p.max_depth);
          r.read_size("min_split", p.min_samples_split);
          if (j.contains("max_features") && j.at("max_features").is_string()) {
            r.mark("max_features");
            if (j.at("max_features").get<std::string>() != "auto") {
              throw Error(ErrorCode::parameter, "rf.max_features must be \"auto\" or an integer");
            }
            p.max_features = 0;
          } else {
            r.read_size("max_features", p.max_features);
          }
          r.read("bootstrap", p.bootstrap);
        } else if constexpr (std::is_same_v<P, GbrParams>) {
          r.read_size("estimators", p.estimators);
          r.read("learning_rate", p.learning_rate);
          r.read_size("depth", p.max_depth);
          r.read_size("min_split", p.min_samples_split);
        } else if constexpr (std::is_same_v<P, XgbParams>) {
          r.read_size("estimators", p.estimators);
          r.read_size("depth", p.max_depth);
          r.read("learning_rate", p.learning_rate);
          r.read("l1", p.l1);
          r.read("l2", p.l2);
          r.read("gamma", p.gamma);
          r.read("min_child_weight", p.min_child_weight);
        } else if constexpr (std::is_same_v<P, GprParams>) {
          r.read_hyper("rbf_length_scale", p.rbf_length_scale);
          r.read_hyper("white_noise", p.white_noise);
          r.read_hyper("rq_length_scale", p.rq_length_scale);
          r.read_hyper("rq_alpha", p.rq_alpha);
          r.read("alpha", p.alpha);
          r.read_size("restarts", p.restarts);
          r.read_size("max_iterations", p.max_iterations);
          r.read_size("max_points", p.max_points);
          r.read_size("optimize_points", p.optimize_points);
          r.read("optimize", p.optimize);
        } else if constexpr (std::is_same_v<P, MlpParams>) {
          r.read("hidden", p.hidden);
          r.read("learning_rate", p.learning_rate);
          r.read("beta1", p.beta1);
          r.read("beta2", p.beta2);
          r.read("epsilon", p.epsilon);
          r.read("l1", p.l1);
          r.read_size("batch", p.batch);
          r.read_size("epochs", p.epochs);
          r.read_size("patience", p.patience);
          std::string activation = p.activation == MlpActivation::relu ? "relu" : "paper_softmax";
          r.read("activation", activation);
          if (activation == "relu") {
            p.activation = MlpActivation::relu;
          } else if (activation == "paper_softmax") {
            p.activation = MlpActivation::paper_softmax;
          } else {
            throw Error(ErrorCode::parameter, "mlp.activation must be \"relu\" or \"paper_softmax\"");
          }
        }
      },
      spec.params);
  r.finish();
  spec.validate();
  return spec;
}

RegressorSpec spec_from_json(const json& j, std::uint64_t seed) {
  if (!j.is_object() || j.size() != 1) throw Error(ErrorCode::parameter, "model spec must be {\"<kind>\": {...}}");
  const auto& [key, body] = *j.items().begin();
  return spec_from_json(model_kind_from_string(key), body, seed);
}

Eigen::VectorXd Regressor::predict(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != n_features_) {
    throw Error(ErrorCode::shape, std::string(to_string(kind())) + ": expected " + std::to_string(n_features_) +
                                      " columns, got " + std::to_string(X.cols()));
  }
  if (X.rows() == 0) return Eigen::VectorXd(0);
  return predict_rows(X);
}

void require_training_shape(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::size_t min_rows) {
  if (X.rows() != y.size()) throw Error(ErrorCode::shape, "training X and y differ in row count");
  if (static_cast<std::size_t>(X.rows()) < min_rows) {
    throw Error(ErrorCode::insufficient_data, "need at least " + std::to_string(min_rows) + " training rows");
  }
  if (X.cols() == 0) throw Error(ErrorCode::shape, "training X has no columns");
  if (!X.allFinite() || !y.allFinite()) throw Error(ErrorCode::parameter, "training data contains NaN or Inf");
}

std::unique_ptr<Regressor> fit(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const FitContext& ctx) {
  switch (spec.kind) {
    case ModelKind::knn: return KnnModel::fit(spec, X, y);
    case ModelKind::rf: return RfModel::fit(spec, X, y, ctx.threads);
    case ModelKind::gbr: return GbrModel::fit(spec, X, y);
    case ModelKind::xgb: return XgbModel::fit(spec, X, y);
    case ModelKind::gpr: return GprModel::fit(spec, X, y);
    case ModelKind::mlp: return MlpModel::fit(spec, X, y, ctx);
  }
  throw Error(ErrorCode::parameter, "unknown model kind");
}

}  // namespace tke
