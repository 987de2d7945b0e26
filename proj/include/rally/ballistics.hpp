// Free flight of the ball with quadratic drag, discretized with explicit Euler,
// and the Jacobians needed to differentiate the landing state with respect to
// the post-impact state.
#pragma once

#include "rally/types.hpp"

#include <optional>
#include <vector>

namespace rally {

/// How the final, shortened integration step is chosen.
enum class LandingStep {
  /// Step length T_last from the drag-free vertical drop time. The landing
  /// state keeps the small residual height this leaves (at most g*T_last^2/2).
  kRemainingTime,
  /// Same termination rule, but the reported landing state is moved along the
  /// last step onto the table plane. The Jacobian differentiates that map.
  kInterpolateToPlane,
};

struct FlightParams {
  double k_drag = 0.106;                 // [1/m]
  Vec3 gravity = Vec3(0.0, 0.0, -9.8);   // [m/s^2]
  double dt = 0.001;                     // [s]
  double z_table = 0.76;                 // [m]
  int max_steps = 10000;
  double g_hat = 9.8;                    // gravity used by the remaining-time rule
  double discriminant_floor = 1e-12;
  double landing_tolerance = 1e-9;       // [m]
  LandingStep landing_step = LandingStep::kInterpolateToPlane;

  void validate() const {
    if (!(k_drag >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "k_drag must be >= 0");
    if (!(dt > 0.0)) throw Error(ErrorKind::kInvalidArgument, "dt must be > 0");
    if (!(gravity.z() < 0.0)) throw Error(ErrorKind::kInvalidArgument, "gravity_z must be < 0");
    if (max_steps < 1) throw Error(ErrorKind::kInvalidArgument, "max_steps must be >= 1");
    if (!(g_hat > 0.0)) throw Error(ErrorKind::kInvalidArgument, "g_hat must be > 0");
  }
};

struct LandingRecord {
  std::vector<BallState> states;  // xi[0] .. xi[k_max]
  int k_max = 0;
  double t_last = 0.0;
  BallState landing_state;
  Vec2 landing_point = Vec2::Zero();
  /// Height above the table plane left by the shortened Euler step, before any
  /// projection onto the plane.
  double plane_residual = 0.0;

  [[nodiscard]] double flight_time(double dt) const { return k_max * dt + t_last; }
};

namespace detail {

inline Vec6 flight_rate(const BallState& xi, const FlightParams& params) {
  Vec6 rate;
  rate << xi.v, -params.k_drag * xi.v.norm() * xi.v + params.gravity;
  return rate;
}

}  // namespace detail

/// One explicit Euler step of the drag model.
inline BallState free_flight_step(const BallState& xi, const FlightParams& params,
                                  std::optional<double> dt_override = std::nullopt) {
  const double step = dt_override.value_or(params.dt);
  const double speed = xi.v.norm();
  BallState next;
  next.p = xi.p + step * xi.v;
  next.v = xi.v + step * (-params.k_drag * speed * xi.v + params.gravity);
  return next;
}

struct StepJacobians {
  Mat6 state;  // d q / d xi
  Vec6 dt;     // d q / d T
};

inline StepJacobians free_flight_step_jacobians(const BallState& xi, const FlightParams& params,
                                                std::optional<double> dt_override = std::nullopt) {
  const double step = dt_override.value_or(params.dt);
  const double speed = xi.v.norm();

  Mat3 drag = Mat3::Zero();
  if (speed > 0.0) {
    drag = speed * Mat3::Identity() + xi.v * xi.v.transpose() / speed;
  }

  StepJacobians jac;
  jac.state.setIdentity();
  jac.state.block<3, 3>(0, 3) = step * Mat3::Identity();
  jac.state.block<3, 3>(3, 3) = Mat3::Identity() - step * params.k_drag * drag;
  jac.dt = detail::flight_rate(xi, params);
  return jac;
}

namespace detail {

inline double drop_discriminant(const BallState& xi, double z_table, double g_hat) {
  const double a = xi.v.z() / g_hat;
  return a * a + 2.0 * (xi.p.z() - z_table) / g_hat;
}

}  // namespace detail

/// Drag-free time until the ball reaches the table height.
inline double remaining_time(const BallState& xi, double z_table, double g_hat = 9.8) {
  const double disc = detail::drop_discriminant(xi, z_table, g_hat);
  if (disc < 0.0) {
    throw Error(ErrorKind::kNegativeDiscriminant, "ball never reaches the table plane");
  }
  return xi.v.z() / g_hat + std::sqrt(disc);
}

/// Gradient of remaining_time with respect to (p, v). Only the vertical
/// entries are non-zero.
inline Vec6 remaining_time_gradient(const BallState& xi, double z_table, double g_hat = 9.8,
                                    double discriminant_floor = 1e-12) {
  const double disc = detail::drop_discriminant(xi, z_table, g_hat);
  if (disc <= discriminant_floor) {
    throw Error(ErrorKind::kSingularGradient, "remaining-time discriminant at or below floor");
  }
  const double root = std::sqrt(disc);
  Vec6 grad = Vec6::Zero();
  grad(2) = 1.0 / (g_hat * root);
  grad(5) = 1.0 / g_hat + xi.v.z() / (g_hat * g_hat * root);
  return grad;
}

/// Integrates from the post-impact state until the table plane is reached.
inline LandingRecord propagate_to_landing(const BallState& xi_plus, const FlightParams& params) {
  if (xi_plus.p.z() < params.z_table) {
    throw Error(ErrorKind::kBelowTablePlane, "post-impact ball starts below the table plane");
  }

  LandingRecord record;
  record.states.push_back(xi_plus);
  double t_rem = remaining_time(xi_plus, params.z_table, params.g_hat);
  while (t_rem > params.dt) {
    if (record.k_max >= params.max_steps) {
      throw Error(ErrorKind::kMaxStepsExceeded, "trajectory did not reach the table plane");
    }
    record.states.push_back(free_flight_step(record.states.back(), params));
    ++record.k_max;
    t_rem = remaining_time(record.states.back(), params.z_table, params.g_hat);
  }

  const BallState& last = record.states.back();
  record.t_last = t_rem;
  BallState landed = free_flight_step(last, params, t_rem);
  record.plane_residual = landed.p.z() - params.z_table;

  if (params.landing_step == LandingStep::kInterpolateToPlane) {
    const double drop = last.p.z() - landed.p.z();
    if (drop > 0.0) {
      const double fraction = (last.p.z() - params.z_table) / drop;
      landed.p = last.p + fraction * (landed.p - last.p);
      landed.v = last.v + fraction * (landed.v - last.v);
      landed.p.z() = params.z_table;
    }
  }

  record.landing_state = landed;
  record.landing_point = landed.p.head<2>();
  return record;
}

/// d xi_landing / d xi_plus: the last-step expansion times the product of the
/// per-step Jacobians over the stored states.
inline Mat6 landing_state_jacobian(const LandingRecord& record, const FlightParams& params) {
  Mat6 chain = Mat6::Identity();
  for (int k = 1; k <= record.k_max; ++k) {
    chain = free_flight_step_jacobians(record.states[k - 1], params).state * chain;
  }

  const BallState& last = record.states[record.k_max];
  Mat6 last_step;
  if (params.landing_step == LandingStep::kRemainingTime) {
    const StepJacobians jac = free_flight_step_jacobians(last, params, record.t_last);
    const Vec6 dt_dxi =
        remaining_time_gradient(last, params.z_table, params.g_hat, params.discriminant_floor);
    last_step = jac.state + jac.dt * dt_dxi.transpose();
  } else {
    // Projection onto the plane is an Euler step of length
    // tau = (p_z - z_table) / (-v_z), whatever T_last was.
    const double vz = last.v.z();
    if (!(vz < 0.0)) {
      throw Error(ErrorKind::kSingularGradient, "plane crossing requires a descending ball");
    }
    const double tau = (last.p.z() - params.z_table) / (-vz);
    const StepJacobians jac = free_flight_step_jacobians(last, params, tau);
    Vec6 dtau_dxi = Vec6::Zero();
    dtau_dxi(2) = -1.0 / vz;
    dtau_dxi(5) = (last.p.z() - params.z_table) / (vz * vz);
    last_step = jac.state + jac.dt * dtau_dxi.transpose();
  }
  return last_step * chain;
}

}  // namespace rally
