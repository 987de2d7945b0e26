#include "rally/greybox.hpp"
#include "rally/sim_env.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace rally;

namespace {

SampledTrajectory nominal_ball(double sample_dt = 0.002) {
  EnvConfig env;
  env.launcher.position_jitter.setZero();
  env.launcher.velocity_jitter.setZero();
  env.launcher.sample_dt = sample_dt;
  Rng rng = make_rng(0);
  return launch(env, rng);
}

InterceptionPolicy random_policy(Rng& rng) {
  std::uniform_real_distribution<double> t1(-0.5, 0.5), t4(-0.2, 0.7);
  return {t1(rng), t4(rng)};
}

double range_of(const Vec2& landing, const InterceptionEvent& e) {
  return (landing - e.racket_pos.head<2>()).norm();
}

}  // namespace

TEST(Greybox, VerticalReturnLandsBelowContact) {
  GreyboxParams params;
  params.geom.theta1_dot = 0.0;
  InterceptionEvent e;
  e.racket_pos = Vec3(0.2, 0.6, 1.0);
  e.xi_minus = {e.racket_pos, Vec3(0, 0, 3.0)};
  const Vec2 landing = predict_landing_frozen({0.0, 0.0}, e, params).landing_point;
  EXPECT_NEAR((landing - Vec2(0.2, 0.6)).norm(), 0.0, 1e-12);
}

TEST(Greybox, MatchesFineStepPipeline) {
  const GreyboxParams params;
  const auto ball = nominal_ball();
  for (const InterceptionPolicy phi : {InterceptionPolicy{0.2, 0.0}, InterceptionPolicy{0.0, 0.3},
                                       InterceptionPolicy{-0.3, 0.5}}) {
    const InterceptionEvent e = interception_event(ball, params.geom, phi.theta1);
    const BallState plus =
        racket_impact(e.xi_minus, racket_rotation(phi), racket_velocity(e, params.geom), params.impact);
    const oracle::Ball ref =
        oracle::fly_to_plane({plus.p, plus.v}, params.flight.k_drag, params.flight.z_table);
    const Vec2 landing = predict_landing(phi, ball, params);
    EXPECT_LT((landing - ref.p.head<2>()).norm(), 5e-3);
  }
}

TEST(Greybox, MoreLoftLandsFarther) {
  // Holds up to theta4 = 0.6; the range peaks shortly after.
  const GreyboxParams params;
  const auto ball = nominal_ball();
  for (double t1 = -0.5; t1 <= 0.5 + 1e-9; t1 += 0.1) {
    const InterceptionEvent e = interception_event(ball, params.geom, t1);
    for (double t4 = -0.2; t4 + 0.1 <= 0.6 + 1e-9; t4 += 0.1) {
      const double near = range_of(predict_landing({t1, t4}, ball, params), e);
      const double far = range_of(predict_landing({t1, t4 + 0.1}, ball, params), e);
      EXPECT_GT(far, near) << "theta1 " << t1 << " theta4 " << t4;
    }
  }
}

TEST(Greybox, LoftDominatesRange) {
  const GreyboxParams params;
  const auto ball = nominal_ball();
  for (double t1 = -0.4; t1 <= 0.4 + 1e-9; t1 += 0.2) {
    for (double t4 = 0.1; t4 <= 0.6 + 1e-9; t4 += 0.1) {
      const LandingPrediction pred = predict_landing_with_gradient({t1, t4}, ball, params);
      const InterceptionEvent e = interception_event(ball, params.geom, t1);
      const Vec2 dir = (pred.landing - e.racket_pos.head<2>()).normalized();
      const Eigen::RowVector2d d_range = dir.transpose() * pred.jacobian;
      EXPECT_GT(std::abs(d_range(1)), std::abs(d_range(0))) << t1 << "," << t4;
    }
  }
}

TEST(Greybox, GradientDoesNotChangeValue) {
  const GreyboxParams params;
  const auto ball = nominal_ball();
  Rng rng = make_rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const InterceptionPolicy phi = random_policy(rng);
    const LandingPrediction pred = predict_landing_with_gradient(phi, ball, params);
    EXPECT_EQ(pred.landing, predict_landing(phi, ball, params));
    EXPECT_TRUE(pred.jacobian.allFinite());
  }
}

TEST(Greybox, FrozenGradientMatchesFiniteDifferences) {
  const GreyboxParams params;
  const auto ball = nominal_ball();
  Rng rng = make_rng(2);
  int flagged = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const InterceptionPolicy phi = random_policy(rng);
    const InterceptionEvent e = interception_event(ball, params.geom, phi.theta1);
    const LandingRecord base = predict_landing_frozen(phi, e, params);
    bool crossed = false;
    const auto f = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      const LandingRecord r = predict_landing_frozen({x(0), x(1)}, e, params);
      crossed = crossed || r.k_max != base.k_max;
      return r.landing_point;
    };
    const Eigen::MatrixXd fd = oracle::central_difference(f, phi.to_vector(), 1e-5);
    if (crossed) {
      ++flagged;
      continue;
    }
    const Mat2 jac = predict_landing_with_gradient(phi, ball, params).jacobian;
    EXPECT_LT(oracle::rel_frobenius(jac, fd), 1e-4) << "trial " << trial;
  }
  EXPECT_LE(flagged, 5);
}

TEST(Greybox, TaylorRemainderIsSecondOrder) {
  const GreyboxParams params;
  const auto ball = nominal_ball();
  Rng rng = make_rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const InterceptionPolicy phi = random_policy(rng);
    const InterceptionEvent e = interception_event(ball, params.geom, phi.theta1);
    const LandingPrediction pred = predict_landing_with_gradient(phi, ball, params);
    const Vec2 dir = Vec2(n(rng), n(rng)).normalized();
    auto remainder = [&](double size) {
      const Vec2 delta = size * dir;
      const Vec2 moved =
          predict_landing_frozen(InterceptionPolicy::from_vector(phi.to_vector() + delta), e, params)
              .landing_point;
      return (moved - pred.landing - pred.jacobian * delta).norm();
    };
    // Steps large enough that the k_max switching noise stays below the
    // quadratic term.
    const double big = remainder(0.02), small = remainder(0.01);
    EXPECT_GE(big / small, 1.9) << "trial " << trial;
  }
}

TEST(Greybox, IndependentOfSamplingDensity) {
  const GreyboxParams params;
  const auto reference = nominal_ball(0.0005);
  Rng rng = make_rng(4);
  for (const double dt : {0.001, 0.002, 0.005, 0.01}) {
    const auto ball = nominal_ball(dt);
    for (int trial = 0; trial < 10; ++trial) {
      const InterceptionPolicy phi = random_policy(rng);
      const Vec2 a = predict_landing(phi, ball, params);
      const Vec2 b = predict_landing(phi, reference, params);
      EXPECT_LT((a - b).norm(), 1e-3) << "sample dt " << dt;
    }
  }
}

TEST(Greybox, CoupledGradientMatchesFullFiniteDifferences) {
  GreyboxParams params;
  params.couple_geometry = true;
  const auto ball = nominal_ball();
  Rng rng = make_rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const InterceptionPolicy phi = random_policy(rng);
    const auto f = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return predict_landing({x(0), x(1)}, ball, params);
    };
    const Eigen::MatrixXd fd = oracle::central_difference(f, phi.to_vector(), 1e-6);
    const Mat2 jac = predict_landing_with_gradient(phi, ball, params).jacobian;
    EXPECT_LT(oracle::rel_frobenius(jac, fd), 1e-3) << "trial " << trial;
  }
}

TEST(Greybox, PredictorHandle) {
  const GreyboxPredictor predictor{GreyboxParams{}};
  const auto ball = nominal_ball();
  const InterceptionPolicy phi{0.1, 0.3};
  EXPECT_EQ(predictor.predict(phi, ball), predict_landing(phi, ball, predictor.params));
  EXPECT_EQ(predictor.jacobian(phi, ball),
            predict_landing_with_gradient(phi, ball, predictor.params).jacobian);
}
