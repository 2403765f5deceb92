#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace tke {

class BinaryWriter;
class BinaryReader;

enum class ModelKind { knn, rf, gbr, xgb, gpr, mlp };

inline constexpr std::array<ModelKind, 6> kAllModelKinds{ModelKind::mlp, ModelKind::rf,  ModelKind::knn,
                                                         ModelKind::gbr, ModelKind::gpr, ModelKind::xgb};

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

enum class KnnWeighting { uniform, inverse_distance };

struct KnnParams {
  std::size_t k = 3;
  KnnWeighting weighting = KnnWeighting::inverse_distance;
};

struct ForestParams {
  std::size_t estimators = 200;
  std::size_t max_depth = 10;
  std::size_t min_samples_split = 2;
  std::size_t max_features = 0;  // 0 means every feature at every split
  bool bootstrap = true;
};

struct GbrParams {
  std::size_t estimators = 100;
  double learning_rate = 0.2;
  std::size_t max_depth = 3;
  std::size_t min_samples_split = 2;
};

struct XgbParams {
  std::size_t estimators = 200;
  std::size_t max_depth = 10;
  double learning_rate = 0.01;
  double l1 = 1.0;
  double l2 = 1.5;
  double gamma = 0.0;
  double min_child_weight = 1.0;
};

// Kernel hyperparameter with log-space bounds; lower == upper pins it.
struct Hyper {
  double value = 1.0;
  double lower = 1e-5;
  double upper = 1e5;

  bool fixed() const { return lower == upper; }
};

struct GprParams {
  Hyper rbf_length_scale{1.0, 1e-5, 1e5};
  Hyper white_noise{1.0, 1e-5, 1e5};
  Hyper rq_length_scale{1.0, 1e-5, 1e5};
  Hyper rq_alpha{1.0, 1e-5, 1e5};
  double alpha = 0.01;  // diagonal jitter
  std::size_t restarts = 3;
  std::size_t max_iterations = 60;
  std::size_t max_points = 4000;       // training-set cap, uniform subsample beyond
  std::size_t optimize_points = 500;  // subsample used while optimizing hyperparameters
  bool optimize = true;
};

enum class MlpActivation {
  relu,          // ReLU hidden layers, linear output
  paper_softmax  // ReLU, ReLU, softmax on the last hidden layer, linear readout
};

struct MlpParams {
  std::vector<std::size_t> hidden{64, 32, 16};
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  double l1 = 0.01;
  std::size_t batch = 42;
  std::size_t epochs = 1000;
  std::size_t patience = 10;
  MlpActivation activation = MlpActivation::relu;
};

using ModelParams = std::variant<KnnParams, ForestParams, GbrParams, XgbParams, GprParams, MlpParams>;

struct RegressorSpec {
  ModelKind kind = ModelKind::knn;
  ModelParams params = KnnParams{};
  std::uint64_t seed = 42;

  // Published defaults for the kind.
  static RegressorSpec defaults(ModelKind kind, std::uint64_t seed = 42);

  // Throws parameter error on non-positive counts or rates, negative
  // regularization weights, or a params alternative that does not match kind.
  void validate() const;
};

// {"<kind>": {hyperparameters...}}; missing keys keep the defaults.
nlohmann::json to_json(const RegressorSpec& spec);
RegressorSpec spec_from_json(ModelKind kind, const nlohmann::json& params, std::uint64_t seed);
RegressorSpec spec_from_json(const nlohmann::json& j, std::uint64_t seed);

class MlpModel;

// Hooks that only some model kinds consult while fitting.
struct FitContext {
  std::size_t threads = 1;
  // Early-stopping monitor for the MLP; the training rows are used when empty.
  const Eigen::MatrixXd* X_val = nullptr;
  const Eigen::VectorXd* y_val = nullptr;
  std::function<void(std::size_t epoch, const MlpModel&)> on_mlp_epoch;
};

class Regressor {
 public:
  explicit Regressor(RegressorSpec spec, std::size_t n_features) : spec_(std::move(spec)), n_features_(n_features) {}
  virtual ~Regressor() = default;

  const RegressorSpec& spec() const { return spec_; }
  ModelKind kind() const { return spec_.kind; }
  std::size_t n_features() const { return n_features_; }

  // Throws shape error when X has the wrong column count.
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

  virtual void write_payload(BinaryWriter& out) const = 0;

 protected:
  virtual Eigen::VectorXd predict_rows(const Eigen::MatrixXd& X) const = 0;

 private:
  RegressorSpec spec_;
  std::size_t n_features_;
};

// Trains a model of spec.kind on standardized X. Deterministic for a fixed seed
// regardless of ctx.threads.
std::unique_ptr<Regressor> fit(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const FitContext& ctx = {});

void require_training_shape(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::size_t min_rows);

}  // namespace tke
