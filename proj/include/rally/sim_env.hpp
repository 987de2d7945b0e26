// Simulated launcher, interception and landing observation. The ground truth
// runs the same physics code as the grey-box predictor with its own
// parameters, then adds Gaussian landing noise.
#pragma once

#include "rally/arm_model.hpp"
#include "rally/ballistics.hpp"
#include "rally/impact.hpp"
#include "rally/metrics.hpp"
#include "rally/rng.hpp"

#include <algorithm>
#include <vector>

namespace rally {

struct Table {
  Vec2 center = Vec2(0.0, 2.0);  // [m]
  double width = 1.525;          // along x [m]
  double length = 2.74;          // along y [m]

  [[nodiscard]] bool contains(const Vec2& xy) const {
    return std::abs(xy.x() - center.x()) <= 0.5 * width &&
           std::abs(xy.y() - center.y()) <= 0.5 * length;
  }
};

struct LauncherConfig {
  // A lob that passes 0.1 m to the side of the arm base, so its azimuth seen
  // from the base sweeps through the whole yaw range.
  BallState nominal_state{Vec3(0.1, 3.5, 1.2), Vec3(0.0, -5.5, 4.0)};
  Vec3 position_jitter = Vec3(0.005, 0.005, 0.005);  // std [m]
  Vec3 velocity_jitter = Vec3(0.01, 0.01, 0.01);     // std [m/s]
  double sample_dt = 0.002;                          // [s]
  double max_time = 3.0;                             // [s]
  /// The ball has left the workspace once it is this far behind the base
  /// along -y or lower than this height.
  double exit_behind = 1.0;  // [m]
  double exit_height = 0.0;  // [m]

  void validate() const {
    if (!(sample_dt > 0.0)) throw Error(ErrorKind::kInvalidArgument, "sample_dt must be > 0");
    if (!(position_jitter.minCoeff() >= 0.0 && velocity_jitter.minCoeff() >= 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "launcher jitter must be >= 0");
    }
    if (!(max_time > 0.0)) throw Error(ErrorKind::kInvalidArgument, "max_time must be > 0");
  }
};

inline FlightParams default_truth_flight() {
  FlightParams p;
  p.k_drag = 0.12;
  p.dt = 0.0005;
  p.max_steps = 20000;
  return p;
}

struct EnvConfig {
  FlightParams truth_flight = default_truth_flight();
  ImpactParams truth_impact{Vec3(0.72, -0.78, 0.72)};
  ArmGeometry geom;
  Vec2 landing_noise_std = Vec2(0.10, 0.23);  // [m]
  LauncherConfig launcher;
  Table table;

  void validate() const {
    truth_flight.validate();
    geom.validate();
    launcher.validate();
    if (!(landing_noise_std.minCoeff() >= 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "landing_noise_std must be >= 0");
    }
  }
};

/// Launches one ball and samples its incoming flight until it hits the table,
/// leaves the arm workspace or max_time elapses.
inline SampledTrajectory launch(const LauncherConfig& cfg, const FlightParams& truth,
                                const Table& table, const ArmGeometry& geom, Rng& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  BallState xi = cfg.nominal_state;
  for (int i = 0; i < 3; ++i) xi.p(i) += cfg.position_jitter(i) * unit(rng);
  for (int i = 0; i < 3; ++i) xi.v(i) += cfg.velocity_jitter(i) * unit(rng);

  // Integrate at the truth step (or finer, to divide sample_dt evenly) and
  // record every sample_dt, so the sampling rate does not change the flight.
  const auto substeps = std::max(1L, static_cast<long>(std::ceil(cfg.sample_dt / truth.dt - 1e-9)));
  const double step = cfg.sample_dt / static_cast<double>(substeps);

  SampledTrajectory samples;
  samples.push_back({0.0, xi});
  const auto steps = static_cast<long>(std::ceil(cfg.max_time / cfg.sample_dt));
  for (long k = 1; k <= steps; ++k) {
    for (long s = 0; s < substeps; ++s) xi = free_flight_step(xi, truth, step);
    samples.push_back({static_cast<double>(k) * cfg.sample_dt, xi});
    const bool hit_table = xi.p.z() <= truth.z_table && table.contains(xi.p.head<2>());
    const bool gone = xi.p.y() < geom.base.y() - cfg.exit_behind || xi.p.z() < cfg.exit_height;
    if (hit_table || gone) break;
  }
  return samples;
}

inline SampledTrajectory launch(const EnvConfig& env, Rng& rng) {
  return launch(env.launcher, env.truth_flight, env.table, env.geom, rng);
}

struct InterceptOutcome {
  Vec2 landing = Vec2::Zero();            // observed, with noise
  Vec2 noiseless_landing = Vec2::Zero();
  InterceptionEvent event;
  SampledTrajectory incoming;
};

/// One physical trial: launch, intercept with the truth arm, fly the return
/// and observe its noisy landing. Missed balls surface as Error with
/// is_miss() true.
inline InterceptOutcome intercept(const InterceptionPolicy& phi, const EnvConfig& env, Rng& rng) {
  InterceptOutcome out;
  out.incoming = launch(env, rng);
  out.event = interception_event(out.incoming, env.geom, phi.theta1);
  const BallState xi_plus = racket_impact(out.event.xi_minus, racket_rotation(phi),
                                          racket_velocity(out.event, env.geom), env.truth_impact);
  out.noiseless_landing = propagate_to_landing(xi_plus, env.truth_flight).landing_point;

  std::normal_distribution<double> unit(0.0, 1.0);
  out.landing = out.noiseless_landing;
  out.landing.x() += env.landing_noise_std.x() * unit(rng);
  out.landing.y() += env.landing_noise_std.y() * unit(rng);
  return out;
}

struct VarianceEstimate {
  Vec2 mean = Vec2::Zero();
  double std = 0.0;
  int misses = 0;
  int trials = 0;
};

/// Repeats intercept with a fixed policy. Misses are tolerated up to 10% of
/// the trials.
inline VarianceEstimate estimate_variance(const InterceptionPolicy& phi, int n_trials,
                                          const EnvConfig& env, Rng& rng) {
  if (n_trials < 2) throw Error(ErrorKind::kInvalidArgument, "n_trials must be >= 2");
  std::vector<Vec2> points;
  VarianceEstimate est;
  est.trials = n_trials;
  for (int i = 0; i < n_trials; ++i) {
    try {
      points.push_back(intercept(phi, env, rng).landing);
    } catch (const Error& e) {
      if (!e.is_miss()) throw;
      ++est.misses;
    }
  }
  if (10 * est.misses >= n_trials || points.size() < 2) {
    throw Error(ErrorKind::kInfeasibleRegion,
                std::to_string(est.misses) + " of " + std::to_string(n_trials) + " balls missed");
  }
  const Metrics m = running_metrics(points, Vec2::Zero());
  est.mean = m.r_bar;
  est.std = m.sigma;
  return est;
}

}  // namespace rally
