// Small tanh multilayer perceptron g_NN(phi) -> landing point, trained with
// Adam, with its exact input-output Jacobian.
#pragma once

#include "rally/arm_model.hpp"
#include "rally/rng.hpp"
#include "rally/types.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace rally {

inline constexpr std::array<int, 6> kMlpWidths = {2, 4, 4, 4, 4, 2};
inline constexpr int kMlpLayers = static_cast<int>(kMlpWidths.size()) - 1;

struct MlpLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;
};

struct MlpModel {
  std::array<MlpLayer, kMlpLayers> layers;
  /// Inputs are mapped affinely from [input_lower, input_upper] onto [-1, 1].
  Vec2 input_lower = Vec2(-1.0, -1.0);
  Vec2 input_upper = Vec2(1.0, 1.0);
  /// Network outputs are landing = output_mean + output_std .* y.
  Vec2 output_mean = Vec2::Zero();
  Vec2 output_std = Vec2::Ones();

  MlpModel() {
    for (int l = 0; l < kMlpLayers; ++l) {
      layers[l].weights = Eigen::MatrixXd::Zero(kMlpWidths[l + 1], kMlpWidths[l]);
      layers[l].bias = Eigen::VectorXd::Zero(kMlpWidths[l + 1]);
    }
  }

  [[nodiscard]] Vec2 input_half_width() const { return 0.5 * (input_upper - input_lower); }
  [[nodiscard]] Vec2 input_center() const { return 0.5 * (input_upper + input_lower); }

  [[nodiscard]] Vec2 normalize_input(const InterceptionPolicy& phi) const {
    return (phi.to_vector() - input_center()).cwiseQuotient(input_half_width());
  }

  [[nodiscard]] bool finite() const {
    for (const auto& layer : layers) {
      if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
    }
    return input_lower.allFinite() && input_upper.allFinite() && output_mean.allFinite() &&
           output_std.allFinite();
  }
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
inline void initialize(MlpModel& model, Rng& rng) {
  for (int l = 0; l < kMlpLayers; ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(kMlpWidths[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto& layer = model.layers[l];
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = dist(rng);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = dist(rng);
  }
}

inline Vec2 mlp_forward(const MlpModel& model, const InterceptionPolicy& phi) {
  Eigen::VectorXd h = model.normalize_input(phi);
  for (int l = 0; l < kMlpLayers - 1; ++l) {
    h = (model.layers[l].weights * h + model.layers[l].bias).array().tanh().matrix();
  }
  const Eigen::VectorXd y = model.layers.back().weights * h + model.layers.back().bias;
  return model.output_mean + model.output_std.cwiseProduct(Vec2(y(0), y(1)));
}

inline Mat2 mlp_jacobian(const MlpModel& model, const InterceptionPolicy& phi) {
  Eigen::VectorXd h = model.normalize_input(phi);
  Eigen::MatrixXd chain = model.input_half_width().cwiseInverse().asDiagonal();
  for (int l = 0; l < kMlpLayers - 1; ++l) {
    h = (model.layers[l].weights * h + model.layers[l].bias).array().tanh().matrix();
    const Eigen::VectorXd slope = (1.0 - h.array().square()).matrix();
    chain = slope.asDiagonal() * (model.layers[l].weights * chain);
  }
  chain = model.layers.back().weights * chain;
  return model.output_std.asDiagonal() * Mat2(chain);
}

struct DataRecord {
  InterceptionPolicy phi;
  Vec2 landing = Vec2::Zero();
};

using Dataset = std::vector<DataRecord>;

struct TrainConfig {
  int epochs = 500;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  int batch_size = 64;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;

  void validate() const {
    if (epochs < 1) throw Error(ErrorKind::kInvalidArgument, "epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::kInvalidArgument, "learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
      throw Error(ErrorKind::kInvalidArgument, "Adam betas must lie in [0, 1)");
    }
    if (!(eps_adam > 0.0)) throw Error(ErrorKind::kInvalidArgument, "eps_adam must be > 0");
    if (batch_size < 1) throw Error(ErrorKind::kInvalidArgument, "batch_size must be >= 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
      throw Error(ErrorKind::kInvalidArgument, "validation_fraction must lie in (0, 1)");
    }
  }
};

struct TrainHistory {
  std::vector<double> train_mse;       // per epoch, [m^2] per coordinate
  std::vector<double> validation_mse;  // empty when fit() ran without a held-out set
};

/// Mean squared landing error per coordinate [m^2].
inline double mean_squared_error(const MlpModel& model, std::span<const DataRecord> data) {
  if (data.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& rec : data) sum += (mlp_forward(model, rec.phi) - rec.landing).squaredNorm();
  return sum / (2.0 * static_cast<double>(data.size()));
}

/// Root mean squared Euclidean landing error [m].
inline double landing_rmse(const MlpModel& model, std::span<const DataRecord> data) {
  return std::sqrt(2.0 * mean_squared_error(model, data));
}

namespace detail {

struct AdamState {
  std::array<Eigen::MatrixXd, kMlpLayers> m_w, v_w;
  std::array<Eigen::VectorXd, kMlpLayers> m_b, v_b;
  long step = 0;

  explicit AdamState(const MlpModel& model) {
    for (int l = 0; l < kMlpLayers; ++l) {
      m_w[l] = v_w[l] = Eigen::MatrixXd::Zero(model.layers[l].weights.rows(),
                                               model.layers[l].weights.cols());
      m_b[l] = v_b[l] = Eigen::VectorXd::Zero(model.layers[l].bias.size());
    }
  }
};

template <typename Param, typename Grad>
void adam_apply(Param& param, Param& m, Param& v, const Grad& grad, const TrainConfig& cfg,
                double bias1, double bias2) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  const auto m_hat = m.array() / bias1;
  const auto v_hat = v.array() / bias2;
  param.array() -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps_adam);
}

/// One Adam step on the mean of 0.5 |y - t|^2 over the batch, in normalized
/// input and output coordinates.
inline void adam_batch_step(MlpModel& model, AdamState& adam, const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& t, const TrainConfig& cfg) {
  const auto batch = static_cast<double>(x.cols());
  std::array<Eigen::MatrixXd, kMlpLayers + 1> act;
  act[0] = x;
  for (int l = 0; l < kMlpLayers; ++l) {
    Eigen::MatrixXd z = model.layers[l].weights * act[l];
    z.colwise() += model.layers[l].bias;
    act[l + 1] = (l < kMlpLayers - 1) ? Eigen::MatrixXd(z.array().tanh()) : z;
  }

  Eigen::MatrixXd delta = (act[kMlpLayers] - t) / batch;
  std::array<Eigen::MatrixXd, kMlpLayers> grad_w;
  std::array<Eigen::VectorXd, kMlpLayers> grad_b;
  for (int l = kMlpLayers - 1; l >= 0; --l) {
    grad_w[l] = delta * act[l].transpose();
    grad_b[l] = delta.rowwise().sum();
    if (l > 0) {
      delta = (model.layers[l].weights.transpose() * delta).cwiseProduct(
          (1.0 - act[l].array().square()).matrix());
    }
  }

  ++adam.step;
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.step));
  for (int l = 0; l < kMlpLayers; ++l) {
    adam_apply(model.layers[l].weights, adam.m_w[l], adam.v_w[l], grad_w[l], cfg, bias1, bias2);
    adam_apply(model.layers[l].bias, adam.m_b[l], adam.v_b[l], grad_b[l], cfg, bias1, bias2);
  }
}

}  // namespace detail

/// Runs Adam on an already initialized and normalized model. The shuffle order
/// is drawn from cfg.seed. validation may be empty.
inline TrainHistory fit(MlpModel& model, std::span<const DataRecord> training,
                        std::span<const DataRecord> validation, const TrainConfig& cfg) {
  cfg.validate();
  if (training.empty()) throw Error(ErrorKind::kDegenerateDataset, "no training records");

  const auto n = static_cast<Eigen::Index>(training.size());
  Eigen::MatrixXd inputs(2, n), targets(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    inputs.col(i) = model.normalize_input(training[i].phi);
    targets.col(i) = (training[i].landing - model.output_mean).cwiseQuotient(model.output_std);
  }

  Rng rng = make_rng(cfg.seed, 1);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  detail::AdamState adam(model);
  TrainHistory history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(cfg.batch_size, n - start);
      Eigen::MatrixXd x(2, count), t(2, count);
      for (Eigen::Index j = 0; j < count; ++j) {
        x.col(j) = inputs.col(order[static_cast<std::size_t>(start + j)]);
        t.col(j) = targets.col(order[static_cast<std::size_t>(start + j)]);
      }
      detail::adam_batch_step(model, adam, x, t, cfg);
    }
    history.train_mse.push_back(mean_squared_error(model, training));
    if (!validation.empty()) history.validation_mse.push_back(mean_squared_error(model, validation));
  }
  return history;
}

struct TrainResult {
  MlpModel model;
  TrainHistory history;
  Dataset training;
  Dataset validation;
};

/// Normalizes, splits off a validation set, initializes and fits.
/// The input box defaults to the bounding box of the data's policies.
inline TrainResult train(const Dataset& data, const TrainConfig& cfg,
                         std::optional<std::pair<Vec2, Vec2>> input_box = std::nullopt) {
  cfg.validate();
  if (data.size() < 10) {
    throw Error(ErrorKind::kInvalidArgument, "training needs at least 10 records");
  }

  Vec2 lo = data.front().phi.to_vector(), hi = lo;
  Vec2 mean = Vec2::Zero();
  for (const auto& rec : data) {
    lo = lo.cwiseMin(rec.phi.to_vector());
    hi = hi.cwiseMax(rec.phi.to_vector());
    mean += rec.landing;
  }
  if (lo == hi) throw Error(ErrorKind::kDegenerateDataset, "all policies in the dataset coincide");
  mean /= static_cast<double>(data.size());
  Vec2 var = Vec2::Zero();
  for (const auto& rec : data) var += (rec.landing - mean).cwiseAbs2();
  Vec2 std_dev = (var / static_cast<double>(data.size())).cwiseSqrt();
  for (int i = 0; i < 2; ++i) {
    if (!(std_dev(i) > 0.0)) std_dev(i) = 1.0;
  }

  TrainResult result;
  if (input_box) {
    lo = input_box->first;
    hi = input_box->second;
  }
  for (int i = 0; i < 2; ++i) {
    // A coordinate that never varies still needs a non-zero scale.
    if (!(hi(i) > lo(i))) {
      lo(i) -= 1.0;
      hi(i) += 1.0;
    }
  }
  result.model.input_lower = lo;
  result.model.input_upper = hi;
  result.model.output_mean = mean;
  result.model.output_std = std_dev;

  Rng rng = make_rng(cfg.seed, 0);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(data.size()))));
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? result.validation : result.training).push_back(data[order[i]]);
  }

  initialize(result.model, rng);
  result.history = fit(result.model, result.training, result.validation, cfg);
  return result;
}

/// Landing Jacobian source backed by a trained network.
struct BlackboxPredictor {
  MlpModel model;

  [[nodiscard]] Vec2 predict(const InterceptionPolicy& phi,
                             std::span<const TimedState> /*incoming*/ = {}) const {
    return mlp_forward(model, phi);
  }
  [[nodiscard]] Mat2 jacobian(const InterceptionPolicy& phi,
                              std::span<const TimedState> /*incoming*/ = {}) const {
    return mlp_jacobian(model, phi);
  }
};

}  // namespace rally
