#ifndef PTDOA_TESTS_SUPPORT_HPP
#define PTDOA_TESTS_SUPPORT_HPP

#include <cmath>
#include <random>

#include "ptdoa/protocol.hpp"

namespace ptdoa::test {

inline Vector vec2(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

/// Ideal clocks, no noise, fixed anchors; motion and timing as given.
inline Scenario fixed_scenario(const std::vector<Vector>& anchors, Motion motion = StaticMotion{},
                               Vector start = Vector::Zero(2), ProtocolTiming timing = {}) {
  Scenario sc;
  sc.dimension = static_cast<int>(start.size());
  sc.timing = timing;
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    AnchorDef a;
    a.id = k;
    a.true_position = anchors[k];
    a.reported_position = anchors[k];
    a.position_covariance = Matrix::Zero(sc.dimension, sc.dimension);
    sc.anchors.push_back(a);
  }
  sc.trajectory.initial_position = start;
  sc.trajectory.motion = std::move(motion);
  return sc;
}

inline std::vector<Vector> square_anchors(std::size_t n, double side, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5 * side, 0.5 * side);
  std::vector<Vector> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(vec2(u(rng), u(rng)));
  return out;
}

inline double relative(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace ptdoa::test

#endif  // PTDOA_TESTS_SUPPORT_HPP
