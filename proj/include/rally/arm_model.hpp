// Kinematics of the four-joint arm at the interception instant.
//
// Frame conventions:
//   * theta1 is the base yaw, measured counterclockwise about +z from the +x
//     axis. The arm's vertical plane at yaw theta1 contains the racket centre.
//   * theta2 is the shoulder angle from the vertical, theta3 the elbow angle
//     relative to link 1 (elbow-up branch, theta3 >= 0).
//   * The racket face normal at rest is +y, perpendicular to the arm plane at
//     theta1 = 0, so a positive yaw rate swings the racket along its normal.
//   * theta4 rolls the racket about the arm axis; Gamma = Rz(theta1) Rx(theta4).
#pragma once

#include "rally/types.hpp"

#include <algorithm>
#include <span>
#include <vector>

namespace rally {

struct InterceptionPolicy {
  double theta1 = 0.0;  // [rad]
  double theta4 = 0.0;  // [rad]

  [[nodiscard]] Vec2 to_vector() const { return {theta1, theta4}; }
  static InterceptionPolicy from_vector(const Vec2& phi) { return {phi(0), phi(1)}; }

  friend bool operator==(const InterceptionPolicy&, const InterceptionPolicy&) = default;
};

struct ArmGeometry {
  Vec3 base = Vec3(0.0, 0.5, 0.8);       // shoulder pivot [m]
  double l1 = 0.5;                        // [m]
  double l2 = 0.45;                       // [m], racket offset folded in
  Vec3 rest_normal = Vec3(0.0, 1.0, 0.0);
  double theta1_dot = 6.0;                // [rad/s]
  double reach_margin = 0.01;             // [m]

  void validate() const {
    if (!(l1 > 0.0 && l2 > 0.0)) throw Error(ErrorKind::kInvalidArgument, "link lengths must be > 0");
    if (std::abs(rest_normal.norm() - 1.0) > 1e-9) {
      throw Error(ErrorKind::kInvalidArgument, "rest_normal must be a unit vector");
    }
  }
};

struct TimedState {
  double t = 0.0;
  BallState state;
};

using SampledTrajectory = std::vector<TimedState>;

struct InterceptionEvent {
  double t_ic = 0.0;
  BallState xi_minus;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double theta3 = 0.0;
  Vec3 racket_pos = Vec3::Zero();
};

/// Azimuth of a point seen from the arm base, counterclockwise from +x.
inline double azimuth_from_base(const Vec3& point, const ArmGeometry& geom) {
  const Vec3 d = point - geom.base;
  return std::atan2(d.y(), d.x());
}

inline Mat3 rotation_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

inline Mat3 rotation_x(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << 1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c;
  return r;
}

inline Mat3 rotation_z_derivative(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << -s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0;
  return r;
}

inline Mat3 rotation_x_derivative(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 r;
  r << 0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s;
  return r;
}

/// Forward kinematics of the racket centre for the given joint angles.
inline Vec3 racket_center(const ArmGeometry& geom, double theta1, double theta2, double theta3) {
  const Vec3 radial(std::cos(theta1), std::sin(theta1), 0.0);
  const Vec3 up(0.0, 0.0, 1.0);
  const Vec3 elbow = geom.base + geom.l1 * (std::sin(theta2) * radial + std::cos(theta2) * up);
  return elbow + geom.l2 * (std::sin(theta2 + theta3) * radial + std::cos(theta2 + theta3) * up);
}

/// First time the ball's azimuth from the base equals theta1, and the elbow-up
/// joint solution that puts the racket centre on the ball.
inline InterceptionEvent interception_event(std::span<const TimedState> incoming,
                                            const ArmGeometry& geom, double theta1) {
  if (incoming.size() < 2) {
    throw Error(ErrorKind::kNoCrossing, "incoming trajectory has fewer than two samples");
  }

  std::size_t bracket = incoming.size();
  double fraction = 0.0;
  double prev = azimuth_from_base(incoming[0].state.p, geom) - theta1;
  for (std::size_t k = 0; k + 1 < incoming.size(); ++k) {
    const double next = azimuth_from_base(incoming[k + 1].state.p, geom) - theta1;
    // Ignore the +-pi wrap of atan2; a real crossing moves by far less than pi.
    if (prev * next <= 0.0 && prev != next && std::abs(prev - next) < 3.0) {
      bracket = k;
      fraction = prev / (prev - next);
      break;
    }
    prev = next;
  }
  if (bracket == incoming.size()) {
    throw Error(ErrorKind::kNoCrossing, "ball never reaches azimuth " + std::to_string(theta1));
  }

  const TimedState& a = incoming[bracket];
  const TimedState& b = incoming[bracket + 1];
  // Place the point where the chord between the samples meets the arm plane,
  // so it lies exactly at azimuth theta1.
  {
    const Vec3 da = a.state.p - geom.base;
    const Vec3 step = b.state.p - a.state.p;
    const double s = std::sin(theta1), c = std::cos(theta1);
    const double denom = step.x() * s - step.y() * c;
    if (denom != 0.0) {
      fraction = std::clamp(-(da.x() * s - da.y() * c) / denom, 0.0, 1.0);
    }
  }
  InterceptionEvent event;
  event.theta1 = theta1;
  event.t_ic = a.t + fraction * (b.t - a.t);
  event.xi_minus.p = a.state.p + fraction * (b.state.p - a.state.p);
  event.xi_minus.v = a.state.v + fraction * (b.state.v - a.state.v);
  event.racket_pos = event.xi_minus.p;

  const Vec3 d = event.racket_pos - geom.base;
  const double horizontal = std::hypot(d.x(), d.y());
  const double distance = d.norm();
  const double min_reach = std::abs(geom.l1 - geom.l2) + geom.reach_margin;
  const double max_reach = geom.l1 + geom.l2 - geom.reach_margin;
  // Small tolerance so the exact boundary counts as reachable.
  if (distance < min_reach - 1e-12 || distance > max_reach + 1e-12) {
    throw Error(ErrorKind::kOutOfReach,
                "interception point at distance " + std::to_string(distance) + " m");
  }

  double cos3 = (distance * distance - geom.l1 * geom.l1 - geom.l2 * geom.l2) /
                (2.0 * geom.l1 * geom.l2);
  cos3 = std::clamp(cos3, -1.0, 1.0);
  event.theta3 = std::acos(cos3);
  if (cos3 >= 1.0) event.theta3 = 0.0;
  // Elevation measured from +z towards the radial direction of the arm plane.
  // The crossing guarantees the point lies in that plane, so the signed radial
  // coordinate equals the horizontal distance.
  const double to_target = std::atan2(horizontal, d.z());
  event.theta2 = to_target - std::atan2(geom.l2 * std::sin(event.theta3),
                                        geom.l1 + geom.l2 * std::cos(event.theta3));
  return event;
}

/// Gamma(phi) = Rz(theta1) Rx(theta4).
inline Mat3 racket_rotation(const InterceptionPolicy& phi) {
  return rotation_z(phi.theta1) * rotation_x(phi.theta4);
}

struct RotationJacobian {
  Mat3 d_theta1;
  Mat3 d_theta4;
};

inline RotationJacobian racket_rotation_jacobian(const InterceptionPolicy& phi) {
  return {rotation_z_derivative(phi.theta1) * rotation_x(phi.theta4),
          rotation_z(phi.theta1) * rotation_x_derivative(phi.theta4)};
}

/// Racket velocity from the base yaw rate alone (all other joint rates zero).
inline Vec3 racket_velocity(const InterceptionEvent& event, const ArmGeometry& geom) {
  return geom.theta1_dot * Vec3::UnitZ().cross(event.racket_pos - geom.base);
}

/// d v_R / d phi with the interception event held fixed: v_R depends on phi
/// only through the frozen racket position, so the result is zero.
inline Mat32 racket_velocity_jacobian(const InterceptionEvent& /*event*/,
                                      const ArmGeometry& /*geom*/) {
  return Mat32::Zero();
}

/// d v_R / d phi when the interception event is recomputed for each theta1.
/// The theta1 column is a central difference through interception_event.
inline Mat32 racket_velocity_jacobian_coupled(std::span<const TimedState> incoming,
                                              const ArmGeometry& geom, double theta1,
                                              double step = 1e-6) {
  const Vec3 ahead = racket_velocity(interception_event(incoming, geom, theta1 + step), geom);
  const Vec3 behind = racket_velocity(interception_event(incoming, geom, theta1 - step), geom);
  Mat32 jac = Mat32::Zero();
  jac.col(0) = (ahead - behind) / (2.0 * step);
  return jac;
}

}  // namespace rally
