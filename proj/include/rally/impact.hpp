// Linear racket-ball impact and its derivative with respect to the policy.
#pragma once

#include "rally/arm_model.hpp"
#include "rally/types.hpp"

namespace rally {

struct ImpactParams {
  /// Diagonal of the restitution matrix in the racket's rest frame. The
  /// negative entry sits on the rest normal (+y).
  Vec3 restitution = Vec3(0.75, -0.75, 0.75);
};

/// p+ = p-, v+ = Gamma M Gamma^T (v- - v_R) + v_R.
inline BallState racket_impact(const BallState& xi_minus, const Mat3& gamma, const Vec3& v_racket,
                               const ImpactParams& params) {
  const Mat3 conjugated = gamma * params.restitution.asDiagonal() * gamma.transpose();
  return {xi_minus.p, conjugated * (xi_minus.v - v_racket) + v_racket};
}

/// d xi+ / d phi (6x2). Position rows are zero because the interception
/// point is frozen; velocity rows follow from the product rule on Gamma.
inline Mat62 impact_state_jacobian(const BallState& xi_minus, const InterceptionPolicy& phi,
                                   const InterceptionEvent& event, const ArmGeometry& geom,
                                   const ImpactParams& params,
                                   const Mat32& d_vracket = Mat32::Zero()) {
  const Mat3 gamma = racket_rotation(phi);
  const RotationJacobian d_gamma = racket_rotation_jacobian(phi);
  const auto restitution = params.restitution.asDiagonal();
  const Mat3 conjugated = gamma * restitution * gamma.transpose();
  const Vec3 relative = xi_minus.v - racket_velocity(event, geom);

  Mat62 jac = Mat62::Zero();
  const Mat3* partials[2] = {&d_gamma.d_theta1, &d_gamma.d_theta4};
  for (int j = 0; j < 2; ++j) {
    const Mat3& dg = *partials[j];
    const Mat3 d_conjugated = dg * restitution * gamma.transpose() + gamma * restitution * dg.transpose();
    jac.block<3, 1>(3, j) =
        d_conjugated * relative - conjugated * d_vracket.col(j) + d_vracket.col(j);
  }
  return jac;
}

}  // namespace rally
