#include "tke/models/mlp.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "tke/error.hpp"
#include "tke/models/model_io.hpp"

namespace tke {

namespace {

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

void softmax_columns(Eigen::MatrixXd& z) {
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double peak = z.col(c).maxCoeff();
    z.col(c) = (z.col(c).array() - peak).exp().matrix();
    z.col(c) /= z.col(c).sum();
  }
}

}  // namespace

MlpModel::MlpModel(RegressorSpec spec, std::size_t n_inputs) : Regressor(std::move(spec), n_inputs) {
  const auto& p = params();
  std::vector<std::size_t> sizes{n_inputs};
  sizes.insert(sizes.end(), p.hidden.begin(), p.hidden.end());
  sizes.push_back(1);
  std::mt19937_64 rng(this->spec().seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(sizes[l]), out = static_cast<Eigen::Index>(sizes[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> init(-limit, limit);
    Eigen::MatrixXd W(out, in);
    for (Eigen::Index j = 0; j < in; ++j) {
      for (Eigen::Index i = 0; i < out; ++i) W(i, j) = init(rng);
    }
    weights_.push_back(std::move(W));
    biases_.push_back(Eigen::VectorXd::Zero(out));
    m_w_.push_back(Eigen::MatrixXd::Zero(out, in));
    v_w_.push_back(Eigen::MatrixXd::Zero(out, in));
    m_b_.push_back(Eigen::VectorXd::Zero(out));
    v_b_.push_back(Eigen::VectorXd::Zero(out));
  }
}

bool MlpModel::softmax_layer(std::size_t l) const {
  return params().activation == MlpActivation::paper_softmax && l + 2 == weights_.size();
}

Eigen::MatrixXd MlpModel::forward(const Eigen::MatrixXd& X, Cache* cache) const {
  Eigen::MatrixXd a = X.transpose();
  if (cache) {
    cache->a.assign(1, a);
    cache->z.clear();
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = (weights_[l] * a).colwise() + biases_[l];
    if (cache) cache->z.push_back(z);
    if (l + 1 == weights_.size()) {
      a = std::move(z);
    } else if (softmax_layer(l)) {
      softmax_columns(z);
      a = std::move(z);
    } else {
      a = z.cwiseMax(0.0);
    }
    if (cache) cache->a.push_back(a);
  }
  return a;  // 1 x n
}

Eigen::VectorXd MlpModel::predict_rows(const Eigen::MatrixXd& X) const { return forward(X, nullptr).row(0).transpose(); }

double MlpModel::data_loss(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) const {
  const Eigen::VectorXd r = predict(X) - y;
  return r.squaredNorm() / static_cast<double>(r.size());
}

double MlpModel::penalty() const {
  double s = 0;
  for (const auto& W : weights_) s += W.cwiseAbs().sum();
  return params().l1 * s;
}

void MlpModel::gradients(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<Eigen::MatrixXd>& dW,
                         std::vector<Eigen::VectorXd>& db, double& loss) const {
  Cache cache;
  const Eigen::MatrixXd out = forward(X, &cache);
  const auto n = static_cast<double>(X.rows());
  const Eigen::RowVectorXd residual = out.row(0) - y.transpose();
  loss = residual.squaredNorm() / n + penalty();

  const double l1 = params().l1;
  dW.resize(weights_.size());
  db.resize(weights_.size());
  Eigen::MatrixXd delta = (2.0 / n) * residual;  // d loss / d z of the output layer
  for (std::size_t l = weights_.size(); l-- > 0;) {
    dW[l] = delta * cache.a[l].transpose() + l1 * weights_[l].unaryExpr(&sign);
    db[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd upstream = weights_[l].transpose() * delta;  // d loss / d a[l]
    if (softmax_layer(l - 1)) {
      const Eigen::MatrixXd& s = cache.a[l];
      const Eigen::RowVectorXd dot = (s.array() * upstream.array()).colwise().sum();
      delta = (s.array() * (upstream.rowwise() - dot).array()).matrix();
    } else {
      delta = (cache.z[l - 1].array() > 0.0).cast<double>() * upstream.array();
    }
  }
}

std::pair<double, std::vector<double>> MlpModel::loss_and_gradient(const Eigen::MatrixXd& X,
                                                                   const Eigen::VectorXd& y) const {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;
  double loss = 0;
  gradients(X, y, dW, db, loss);
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < dW.size(); ++l) {
    flat.insert(flat.end(), dW[l].data(), dW[l].data() + dW[l].size());
    flat.insert(flat.end(), db[l].data(), db[l].data() + db[l].size());
  }
  return {loss, flat};
}

double MlpModel::train_step(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() == 0) throw Error(ErrorCode::empty_input, "mlp_train_step: empty batch");
  if (X.rows() != y.size()) throw Error(ErrorCode::shape, "mlp_train_step: X/y row mismatch");
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;
  double loss = 0;
  gradients(X, y, dW, db, loss);
  if (!std::isfinite(loss)) throw Error(ErrorCode::divergence, "mlp: non-finite loss at step " + std::to_string(step_));

  const auto& p = params();
  ++step_;
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(step_));
  auto update = [&](auto& theta, const auto& g, auto& m, auto& v) {
    m = p.beta1 * m + (1.0 - p.beta1) * g;
    v = p.beta2 * v + (1.0 - p.beta2) * g.cwiseProduct(g);
    theta.array() -= p.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + p.epsilon);
  };
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    update(weights_[l], dW[l], m_w_[l], v_w_[l]);
    update(biases_[l], db[l], m_b_[l], v_b_[l]);
  }
  return loss;
}

std::vector<double> MlpModel::parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    flat.insert(flat.end(), weights_[l].data(), weights_[l].data() + weights_[l].size());
    flat.insert(flat.end(), biases_[l].data(), biases_[l].data() + biases_[l].size());
  }
  return flat;
}

void MlpModel::set_parameters(std::span<const double> theta) {
  if (theta.size() != parameter_count()) throw Error(ErrorCode::shape, "set_parameters: wrong parameter count");
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index i = 0; i < weights_[l].size(); ++i) weights_[l].data()[i] = theta[k++];
    for (Eigen::Index i = 0; i < biases_[l].size(); ++i) biases_[l].data()[i] = theta[k++];
  }
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  return n;
}

std::vector<double> MlpModel::weight_vector() const {
  std::vector<double> w;
  for (const auto& W : weights_) w.insert(w.end(), W.data(), W.data() + W.size());
  return w;
}

void MlpModel::write_payload(BinaryWriter& out) const {
  out.put<std::uint64_t>(weights_.size());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.put_matrix(weights_[l]);
    out.put_vector(biases_[l]);
  }
}

std::unique_ptr<MlpModel> MlpModel::read(const RegressorSpec& spec, std::size_t n_inputs, BinaryReader& in) {
  auto model = std::make_unique<MlpModel>(spec, n_inputs);
  const auto layers = in.get<std::uint64_t>();
  if (layers != model->weights_.size()) throw Error(ErrorCode::parse, "model file: MLP layer count disagrees with spec");
  for (std::size_t l = 0; l < layers; ++l) {
    Eigen::MatrixXd W = in.get_matrix();
    Eigen::VectorXd b = in.get_vector();
    if (W.rows() != model->weights_[l].rows() || W.cols() != model->weights_[l].cols() || b.size() != W.rows()) {
      throw Error(ErrorCode::parse, "model file: MLP layer shape disagrees with spec");
    }
    model->weights_[l] = std::move(W);
    model->biases_[l] = std::move(b);
  }
  return model;
}

double mlp_train_step(MlpModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return model.train_step(X, y);
}

MlpHistory mlp_train(MlpModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::MatrixXd& X_val,
                     const Eigen::VectorXd& y_val, const std::function<void(std::size_t, const MlpModel&)>& on_epoch) {
  const auto& p = model.params();
  if (p.patience < 1) throw Error(ErrorCode::parameter, "mlp: patience must be >= 1");
  if (X.rows() == 0 || X_val.rows() == 0) throw Error(ErrorCode::empty_input, "mlp_train: empty training or monitor set");
  const auto n = static_cast<std::size_t>(X.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(model.spec().seed ^ 0x5bd1e995ULL);

  MlpHistory history;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_params = model.parameters();
  std::size_t wait = 0;
  for (std::size_t epoch = 1; epoch <= p.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += p.batch) {
      const std::size_t stop = std::min(n, start + p.batch);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Eigen::MatrixXd Xb = X(std::vector<std::size_t>(idx.begin(), idx.end()), Eigen::all);
      const Eigen::VectorXd yb = y(std::vector<std::size_t>(idx.begin(), idx.end()));
      epoch_loss += model.train_step(Xb, yb);
      ++batches;
    }
    history.train_loss.push_back(epoch_loss / static_cast<double>(batches));
    const double val = model.data_loss(X_val, y_val);
    if (!std::isfinite(val)) throw Error(ErrorCode::divergence, "mlp: non-finite validation loss at epoch " + std::to_string(epoch));
    history.val_loss.push_back(val);
    history.epochs_run = epoch;
    if (on_epoch) on_epoch(epoch, model);
    if (val < best) {
      best = val;
      best_params = model.parameters();
      history.best_epoch = epoch;
      wait = 0;
    } else if (++wait >= p.patience) {
      history.stopped_early = true;
      break;
    }
  }
  model.set_parameters(best_params);
  return history;
}

std::unique_ptr<MlpModel> MlpModel::fit(const RegressorSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                        const FitContext& ctx) {
  spec.validate();
  require_training_shape(X, y, 2);
  auto model = std::make_unique<MlpModel>(spec, static_cast<std::size_t>(X.cols()));
  const bool has_val = ctx.X_val && ctx.y_val && ctx.X_val->rows() > 0;
  mlp_train(*model, X, y, has_val ? *ctx.X_val : X, has_val ? *ctx.y_val : y, ctx.on_mlp_epoch);
  return model;
}

}  // namespace tke
