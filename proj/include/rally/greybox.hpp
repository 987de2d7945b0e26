// First-principles landing predictor g(phi): interception geometry, racket
// impact and drag flight, with the 2x2 policy Jacobian assembled by the chain
// rule through the impact and every flight step.
#pragma once

#include "rally/arm_model.hpp"
#include "rally/ballistics.hpp"
#include "rally/impact.hpp"

#include <span>

namespace rally {

struct GreyboxParams {
  FlightParams flight;
  ImpactParams impact;
  ArmGeometry geom;
  /// Also differentiate through the interception event (numerically).
  bool couple_geometry = false;
  double coupling_step = 1e-6;  // [rad]
};

struct LandingPrediction {
  Vec2 landing = Vec2::Zero();
  Mat2 jacobian = Mat2::Zero();
  int k_max = 0;
};

namespace detail {

inline LandingRecord fly_from_event(const InterceptionEvent& event, const InterceptionPolicy& phi,
                                    const GreyboxParams& params) {
  const BallState xi_plus = racket_impact(event.xi_minus, racket_rotation(phi),
                                          racket_velocity(event, params.geom), params.impact);
  return propagate_to_landing(xi_plus, params.flight);
}

}  // namespace detail

/// Landing point with the interception event taken as given. This is the map
/// whose derivative predict_landing_with_gradient returns when
/// couple_geometry is off.
inline LandingRecord predict_landing_frozen(const InterceptionPolicy& phi,
                                            const InterceptionEvent& event,
                                            const GreyboxParams& params) {
  return detail::fly_from_event(event, phi, params);
}

inline Vec2 predict_landing(const InterceptionPolicy& phi, std::span<const TimedState> incoming,
                            const GreyboxParams& params) {
  const InterceptionEvent event = interception_event(incoming, params.geom, phi.theta1);
  return detail::fly_from_event(event, phi, params).landing_point;
}

inline LandingPrediction predict_landing_with_gradient(const InterceptionPolicy& phi,
                                                       std::span<const TimedState> incoming,
                                                       const GreyboxParams& params) {
  const InterceptionEvent event = interception_event(incoming, params.geom, phi.theta1);
  const LandingRecord record = detail::fly_from_event(event, phi, params);

  const Mat6 flight_jac = landing_state_jacobian(record, params.flight);
  const Mat62 impact_jac =
      impact_state_jacobian(event.xi_minus, phi, event, params.geom, params.impact);
  const Mat62 full = flight_jac * impact_jac;

  LandingPrediction out;
  out.landing = record.landing_point;
  out.jacobian = full.topRows<2>();
  out.k_max = record.k_max;

  if (params.couple_geometry) {
    // Extra theta1 dependence through t_ic, xi-, p+ and v_R, Gamma held fixed.
    const double h = params.coupling_step;
    const auto shifted = [&](double theta1) {
      const InterceptionEvent moved = interception_event(incoming, params.geom, theta1);
      return detail::fly_from_event(moved, phi, params).landing_point;
    };
    out.jacobian.col(0) += (shifted(phi.theta1 + h) - shifted(phi.theta1 - h)) / (2.0 * h);
  }
  return out;
}

/// Landing Jacobian source for the optimizer. The model is evaluated on the
/// incoming ball of the current trial.
struct GreyboxPredictor {
  GreyboxParams params;

  [[nodiscard]] Vec2 predict(const InterceptionPolicy& phi,
                             std::span<const TimedState> incoming) const {
    return predict_landing(phi, incoming, params);
  }
  [[nodiscard]] Mat2 jacobian(const InterceptionPolicy& phi,
                              std::span<const TimedState> incoming) const {
    return predict_landing_with_gradient(phi, incoming, params).jacobian;
  }
};

}  // namespace rally
