// Approximate online projected gradient descent over the interception policy.
//
// Each iteration launches a ball, observes where the return lands and steps
// phi against J^T (r_landing - r_target), where J comes from a landing
// predictor. The observed landing error is exact; only J is modeled.
#pragma once

#include "rally/arm_model.hpp"
#include "rally/metrics.hpp"
#include "rally/rng.hpp"
#include "rally/sim_env.hpp"

#include <algorithm>
#include <concepts>
#include <numbers>
#include <span>
#include <vector>

namespace rally {

struct FeasibleSet {
  Vec2 lower = Vec2(-std::numbers::pi / 2.0, -std::numbers::pi / 4.0);
  Vec2 upper = Vec2(std::numbers::pi / 2.0, std::numbers::pi / 4.0);

  void validate() const {
    if (!(lower.array() < upper.array()).all()) {
      throw Error(ErrorKind::kInvalidArgument, "feasible set needs lower < upper");
    }
  }

  [[nodiscard]] bool contains(const InterceptionPolicy& phi) const {
    const Vec2 v = phi.to_vector();
    return (v.array() >= lower.array()).all() && (v.array() <= upper.array()).all();
  }
};

inline InterceptionPolicy project(const InterceptionPolicy& phi, const FeasibleSet& k) {
  return {std::clamp(phi.theta1, k.lower(0), k.upper(0)),
          std::clamp(phi.theta4, k.lower(1), k.upper(1))};
}

inline InterceptionPolicy gd_update(const InterceptionPolicy& phi, const Vec2& r_landing,
                                    const Vec2& r_target, const Mat2& jac, double alpha,
                                    const FeasibleSet& k) {
  if (!(alpha > 0.0)) throw Error(ErrorKind::kInvalidArgument, "alpha must be > 0");
  const Vec2 next = phi.to_vector() - alpha * jac.transpose() * (r_landing - r_target);
  return project(InterceptionPolicy::from_vector(next), k);
}

struct StepSchedule {
  double alpha1 = 0.05;
};

inline double step_length(const StepSchedule& schedule, int i) {
  if (i < 1) throw Error(ErrorKind::kInvalidArgument, "iteration index starts at 1");
  return schedule.alpha1 / std::sqrt(static_cast<double>(i));
}

struct IterationRecord {
  int iter = 0;
  InterceptionPolicy phi;
  Vec2 landing = Vec2::Zero();
  double alpha = 0.0;
  double loss = 0.0;
  double eps = 0.0;
  double sigma = 0.0;
  Vec2 r_bar = Vec2::Zero();
  int misses = 0;          // launches lost before this landing was observed
  bool gradient_ok = true; // false when the predictor could not supply J
};

struct RunLog {
  std::vector<IterationRecord> records;
  Vec2 target = Vec2::Zero();
  std::uint64_t seed = 0;
  int total_misses = 0;

  [[nodiscard]] std::vector<Vec2> landings() const {
    std::vector<Vec2> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.landing);
    return out;
  }
};

/// Anything that turns a policy and the incoming ball of the current trial
/// into a landing Jacobian.
template <typename P>
concept LandingJacobianSource =
    requires(const P& p, const InterceptionPolicy& phi, std::span<const TimedState> incoming) {
      { p.jacobian(phi, incoming) } -> std::convertible_to<Mat2>;
    };

/// Simulated plant: a thin handle around EnvConfig.
struct SimEnv {
  EnvConfig config;
  InterceptOutcome intercept(const InterceptionPolicy& phi, Rng& rng) const {
    return rally::intercept(phi, config, rng);
  }
};

struct RunOptions {
  int n_iters = 200;
  StepSchedule schedule;
  FeasibleSet k;
  int max_consecutive_misses = 20;
};

template <typename Env, LandingJacobianSource Predictor>
RunLog run_online(const Env& env, const Predictor& predictor, const Vec2& r_target,
                  const InterceptionPolicy& phi1, const RunOptions& opts, std::uint64_t seed) {
  if (opts.n_iters < 1) throw Error(ErrorKind::kInvalidArgument, "n_iters must be >= 1");
  opts.k.validate();
  if (!opts.k.contains(phi1)) throw Error(ErrorKind::kInvalidArgument, "phi1 lies outside K");

  Rng rng = make_rng(seed);
  RunLog log;
  log.target = r_target;
  log.seed = seed;
  MetricsState metrics(r_target);
  InterceptionPolicy phi = phi1;

  for (int i = 1; i <= opts.n_iters; ++i) {
    int misses = 0;
    InterceptOutcome outcome;
    while (true) {
      try {
        outcome = env.intercept(phi, rng);
        break;
      } catch (const Error& e) {
        if (!e.is_miss()) throw;
        ++misses;
        ++log.total_misses;
        if (misses >= opts.max_consecutive_misses) {
          throw Error(ErrorKind::kAbortedRun, std::to_string(misses) +
                                                  " consecutive missed balls at iteration " +
                                                  std::to_string(i));
        }
      }
    }

    IterationRecord rec;
    rec.iter = i;
    rec.phi = phi;
    rec.landing = outcome.landing;
    rec.alpha = step_length(opts.schedule, i);
    rec.loss = 0.5 * (outcome.landing - r_target).squaredNorm();
    rec.misses = misses;
    const Metrics m = metrics.add(outcome.landing);
    rec.eps = m.eps;
    rec.sigma = m.sigma;
    rec.r_bar = m.r_bar;

    try {
      const Mat2 jac = predictor.jacobian(phi, outcome.incoming);
      phi = gd_update(phi, outcome.landing, r_target, jac, rec.alpha, opts.k);
    } catch (const Error& e) {
      // The model cannot be evaluated here (for instance its own flight
      // misses the table); keep the policy for the next trial.
      if (!e.is_miss() && e.kind() != ErrorKind::kSingularGradient) throw;
      rec.gradient_ok = false;
    }
    log.records.push_back(rec);
  }
  return log;
}

}  // namespace rally
