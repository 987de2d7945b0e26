#include "rally/mlp.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace rally;

namespace {

MlpModel random_model(Rng& rng) {
  MlpModel m;
  initialize(m, rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  m.input_lower = Vec2(-0.5 + 0.1 * u(rng), -0.2 + 0.1 * u(rng));
  m.input_upper = Vec2(0.5 + 0.1 * u(rng), 0.7 + 0.1 * u(rng));
  m.output_mean = Vec2(u(rng), 2.0 + u(rng));
  m.output_std = Vec2(0.3 + 0.1 * u(rng), 0.5 + 0.1 * u(rng));
  return m;
}

Dataset affine_dataset(int n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> t1(-0.5, 0.5), t4(-0.2, 0.7);
  Mat2 a;
  a << 0.8, 0.1, -0.2, 1.5;
  const Vec2 b(0.05, 2.2);
  Dataset data;
  for (int i = 0; i < n; ++i) {
    const InterceptionPolicy phi{t1(rng), t4(rng)};
    data.push_back({phi, a * phi.to_vector() + b});
  }
  return data;
}

}  // namespace

TEST(Mlp, ZeroNetwork) {
  MlpModel m;
  m.output_mean = Vec2(0.1, 2.3);
  EXPECT_EQ(mlp_forward(m, {0.3, -0.1}), Vec2(0.1, 2.3));
  EXPECT_EQ(mlp_jacobian(m, {0.3, -0.1}), Mat2::Zero());
  EXPECT_TRUE(m.finite());
}

TEST(Mlp, Architecture) {
  const MlpModel m;
  ASSERT_EQ(m.layers.size(), 5u);
  for (int l = 0; l < kMlpLayers; ++l) {
    EXPECT_EQ(m.layers[l].weights.rows(), kMlpWidths[l + 1]);
    EXPECT_EQ(m.layers[l].weights.cols(), kMlpWidths[l]);
  }
}

TEST(Mlp, JacobianMatchesFiniteDifferences) {
  Rng rng = make_rng(7);
  std::uniform_real_distribution<double> t1(-0.5, 0.5), t4(-0.2, 0.7);
  for (int trial = 0; trial < 100; ++trial) {
    const MlpModel m = random_model(rng);
    const InterceptionPolicy phi{t1(rng), t4(rng)};
    const auto f = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return mlp_forward(m, {x(0), x(1)});
    };
    const Eigen::MatrixXd fd = oracle::central_difference(f, phi.to_vector(), 1e-6);
    EXPECT_LT(oracle::rel_frobenius(mlp_jacobian(m, phi), fd), 1e-7) << "trial " << trial;
  }
}

TEST(Mlp, SmallSignalIsLinear) {
  // Identity hidden layers padded with zeros, inputs scaled by 1e-6 so every
  // tanh works near the origin.
  MlpModel m;
  m.input_lower = Vec2(-1e6, -1e6);
  m.input_upper = Vec2(1e6, 1e6);
  Eigen::MatrixXd first = Eigen::MatrixXd::Zero(4, 2);
  first(0, 0) = 0.7;
  first(1, 1) = -1.3;
  first(2, 0) = 0.4;
  m.layers[0].weights = first;
  for (int l = 1; l < kMlpLayers - 1; ++l) m.layers[l].weights = Eigen::MatrixXd::Identity(4, 4);
  Eigen::MatrixXd last = Eigen::MatrixXd::Zero(2, 4);
  last(0, 0) = 1.1;
  last(0, 2) = 0.5;
  last(1, 1) = 0.9;
  m.layers.back().weights = last;
  m.output_std = Vec2(2.0, 3.0);

  Eigen::MatrixXd product = last;
  for (int l = kMlpLayers - 2; l >= 0; --l) product = product * m.layers[l].weights;
  const Mat2 expected = Vec2(2.0, 3.0).asDiagonal() * Mat2(product) * 1e-6;
  const Mat2 jac = mlp_jacobian(m, {0.5, -0.3});
  EXPECT_LT(oracle::rel_frobenius(jac, expected), 1e-4);
}

TEST(Mlp, OverfitsASingleRecord) {
  MlpModel m;
  Rng rng = make_rng(3);
  initialize(m, rng);
  const Dataset one = {{{0.1, 0.2}, Vec2(0.4, -0.3)}};
  TrainConfig cfg;
  cfg.epochs = 3000;
  cfg.learning_rate = 1e-2;
  fit(m, one, {}, cfg);
  EXPECT_LT((mlp_forward(m, one[0].phi) - one[0].landing).norm(), 1e-3);
}

TEST(Mlp, LearnsAnAffineMap) {
  const Dataset data = affine_dataset(1000, 1);
  TrainConfig cfg;
  cfg.epochs = 500;
  const TrainResult r = train(data, cfg, std::pair{Vec2(-0.5, -0.2), Vec2(0.5, 0.7)});
  EXPECT_LT(landing_rmse(r.model, r.validation), 1e-2);
  EXPECT_EQ(r.history.train_mse.size(), 500u);
  EXPECT_EQ(r.history.validation_mse.size(), 500u);
}

TEST(Mlp, TrainingDoesNotWorsen) {
  const Dataset data = affine_dataset(300, 2);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig cfg;
    cfg.seed = seed;
    const TrainResult r = train(data, cfg);
    EXPECT_LE(r.history.train_mse.back(), r.history.train_mse.front()) << "seed " << seed;
    EXPECT_TRUE(r.model.finite());
  }
}

TEST(Mlp, TrainingIsDeterministic) {
  const Dataset data = affine_dataset(200, 3);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.seed = 9;
  const TrainResult a = train(data, cfg);
  const TrainResult b = train(data, cfg);
  for (int l = 0; l < kMlpLayers; ++l) {
    EXPECT_EQ(a.model.layers[l].weights, b.model.layers[l].weights);
    EXPECT_EQ(a.model.layers[l].bias, b.model.layers[l].bias);
  }
  cfg.seed = 10;
  const TrainResult c = train(data, cfg);
  EXPECT_NE(a.model.layers[0].weights, c.model.layers[0].weights);
}

TEST(Mlp, DegenerateDataset) {
  Dataset data(20, DataRecord{{0.1, 0.2}, Vec2(0.0, 2.0)});
  try {
    train(data, TrainConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateDataset);
  }
  MlpModel m;
  try {
    fit(m, {}, {}, TrainConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateDataset);
  }
}

TEST(Mlp, InputsNormalizedIntoUnitBox) {
  const Dataset data = affine_dataset(300, 4);
  TrainConfig cfg;
  cfg.epochs = 1;
  const TrainResult r = train(data, cfg, std::pair{Vec2(-0.5, -0.2), Vec2(0.5, 0.7)});
  for (const auto& rec : data) {
    const Vec2 x = r.model.normalize_input(rec.phi);
    EXPECT_LE(x.cwiseAbs().maxCoeff(), 1.0 + 1e-12);
  }
  EXPECT_EQ(r.model.normalize_input({-0.5, -0.2}), Vec2(-1.0, -1.0));
  EXPECT_EQ(r.model.normalize_input({0.5, 0.7}), Vec2(1.0, 1.0));
}

TEST(Mlp, InvalidConfig) {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), Error);
}
