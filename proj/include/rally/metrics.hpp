// Running performance metrics over the landing points observed so far.
#pragma once

#include "rally/types.hpp"

#include <span>
#include <vector>

namespace rally {

struct Metrics {
  Vec2 r_bar = Vec2::Zero();
  double eps = 0.0;
  double sigma = 0.0;
};

/// Mean landing point, its distance to the target, and the population
/// standard deviation sqrt(mean |r_j - r_bar|^2).
inline Metrics running_metrics(std::span<const Vec2> points, const Vec2& target) {
  if (points.empty()) throw Error(ErrorKind::kInvalidArgument, "running_metrics needs points");
  Metrics m;
  for (const Vec2& r : points) m.r_bar += r;
  m.r_bar /= static_cast<double>(points.size());
  double sq = 0.0;
  for (const Vec2& r : points) sq += (r - m.r_bar).squaredNorm();
  m.eps = (target - m.r_bar).norm();
  m.sigma = std::sqrt(sq / static_cast<double>(points.size()));
  return m;
}

/// Keeps every point so the metrics are recomputed exactly, not updated
/// incrementally.
class MetricsState {
 public:
  explicit MetricsState(const Vec2& target) : target_(target) {}

  Metrics add(const Vec2& r) {
    points_.push_back(r);
    return current();
  }

  [[nodiscard]] Metrics current() const { return running_metrics(points_, target_); }
  [[nodiscard]] std::size_t count() const { return points_.size(); }
  [[nodiscard]] const std::vector<Vec2>& points() const { return points_; }

 private:
  Vec2 target_;
  std::vector<Vec2> points_;
};

}  // namespace rally
