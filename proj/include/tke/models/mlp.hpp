#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tke/models/regressor.hpp"

namespace tke {

// Fully connected regressor: inputs -> hidden layers -> one linear output.
// Trained on mean squared error plus l1 * sum |weights| (biases unpenalized)
// with Adam.
class MlpModel final : public Regressor {
 public:
  // Glorot-uniform weights drawn from spec.seed, zero biases.
  MlpModel(RegressorSpec spec, std::size_t n_inputs);

  static std::unique_ptr<MlpModel> fit(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                       const FitContext& ctx = {});
  static std::unique_ptr<MlpModel> read(const RegressorSpec& spec, std::size_t n_inputs, BinaryReader& in);

  const MlpParams& params() const { return std::get<MlpParams>(spec().params); }
  std::size_t layer_count() const { return weights_.size(); }
  const Eigen::MatrixXd& layer_weights(std::size_t l) const { return weights_[l]; }
  const Eigen::VectorXd& layer_bias(std::size_t l) const { return biases_[l]; }

  // Flattened parameters: per layer, W (column-major) then b.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> theta);
  std::size_t parameter_count() const;

  // Weight entries only, used by the penalty.
  std::vector<double> weight_vector() const;

  double data_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const;
  double penalty() const;
  double loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const { return data_loss(X, y) + penalty(); }

  // Objective value and its gradient in parameters() order. The l1 term uses
  // sign(w) with sign(0) = 0.
  std::pair<double, std::vector<double>> loss_and_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const;

  // One Adam step on the batch; returns the pre-step objective. Throws
  // divergence error on a non-finite loss.
  double train_step(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
  std::uint64_t step_count() const { return step_; }

  void write_payload(BinaryWriter& out) const override;

 protected:
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& X) const override;

 private:
  struct Cache {
    std::vector<Eigen::MatrixXd> z;  // pre-activations
    std::vector<Eigen::MatrixXd> a;  // activations; a[0] is the input
  };
  Eigen::MatrixXd forward(const Eigen::MatrixXd& X, Cache* cache) const;
  void gradients(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<Eigen::MatrixXd>& dW,
                 std::vector<Eigen::VectorXd>& db, double& loss) const;
  bool softmax_layer(std::size_t l) const;

  std::vector<Eigen::MatrixXd> weights_;  // layer l: out x in
  std::vector<Eigen::VectorXd> biases_;
  std::vector<Eigen::MatrixXd> m_w_, v_w_;
  std::vector<Eigen::VectorXd> m_b_, v_b_;
  std::uint64_t step_ = 0;
};

double mlp_train_step(MlpModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

struct MlpHistory {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;  // 1-based
  bool stopped_early = false;
  std::vector<double> train_loss;
  std::vector<double> val_loss;  // data loss on the monitor set
};

// Shuffled minibatch epochs. Stops once `patience` consecutive epochs fail to
// lower the validation loss, then restores the best-validation parameters.
MlpHistory mlp_train(MlpModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::MatrixXd& X_val,
                     const Eigen::VectorXd& y_val,
                     const std::function<void(std::size_t epoch, const MlpModel&)>& on_epoch = {});

}  // namespace tke
