// Common vector types, ball state and the error type shared by all modules.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace rally {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat62 = Eigen::Matrix<double, 6, 2>;
using Mat32 = Eigen::Matrix<double, 3, 2>;

/// Ball position [m] and velocity [m/s] in the world frame.
struct BallState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();

  BallState() = default;
  BallState(const Vec3& position, const Vec3& velocity) : p(position), v(velocity) {}

  static BallState from_vector(const Vec6& xi) {
    return {xi.head<3>(), xi.tail<3>()};
  }

  [[nodiscard]] Vec6 to_vector() const {
    Vec6 xi;
    xi << p, v;
    return xi;
  }

  [[nodiscard]] bool finite() const { return p.allFinite() && v.allFinite(); }
};

enum class ErrorKind {
  kNoCrossing,
  kOutOfReach,
  kMaxStepsExceeded,
  kNegativeDiscriminant,
  kSingularGradient,
  kBelowTablePlane,
  kDegenerateDataset,
  kInfeasibleRegion,
  kAbortedRun,
  kInvalidArgument,
  kConfig,
  kIo,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNoCrossing: return "NoCrossing";
    case ErrorKind::kOutOfReach: return "OutOfReach";
    case ErrorKind::kMaxStepsExceeded: return "MaxStepsExceeded";
    case ErrorKind::kNegativeDiscriminant: return "NegativeDiscriminant";
    case ErrorKind::kSingularGradient: return "SingularGradient";
    case ErrorKind::kBelowTablePlane: return "BelowTablePlane";
    case ErrorKind::kDegenerateDataset: return "DegenerateDataset";
    case ErrorKind::kInfeasibleRegion: return "InfeasibleRegion";
    case ErrorKind::kAbortedRun: return "AbortedRun";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kConfig: return "ConfigError";
    case ErrorKind::kIo: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

  /// True for the failures that correspond to a missed or unreturnable ball.
  [[nodiscard]] bool is_miss() const noexcept {
    switch (kind_) {
      case ErrorKind::kNoCrossing:
      case ErrorKind::kOutOfReach:
      case ErrorKind::kBelowTablePlane:
      case ErrorKind::kNegativeDiscriminant:
      case ErrorKind::kMaxStepsExceeded:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorKind kind_;
};

}  // namespace rally
