#ifndef PTDOA_SCENARIO_HPP
#define PTDOA_SCENARIO_HPP

#include <random>
#include <variant>
#include <vector>

#include "ptdoa/clock.hpp"
#include "ptdoa/types.hpp"

namespace ptdoa {

struct StaticMotion {};

struct LinearMotion {
  Vector velocity;
};

/// Circle through the initial position, tangent to `heading` there. `normal` is the unit
/// vector from the initial position toward the centre; its side fixes the rotation sense.
struct CircularMotion {
  double speed = 0.0;
  double radius = 1.0;
  Vector heading;
  Vector normal;
};

struct AcceleratedMotion {
  Vector velocity;
  Vector acceleration;
};

using Motion = std::variant<StaticMotion, LinearMotion, CircularMotion, AcceleratedMotion>;

struct Trajectory {
  Vector initial_position;
  Motion motion = StaticMotion{};

  void validate(int dimension) const;
};

/// Analytic target position at global time t.
[[nodiscard]] Vector position_at(const Trajectory& trajectory, double t);

struct AnchorDef {
  std::size_t id = 0;  // zero-based slot index
  Vector true_position;
  Vector reported_position;
  Matrix position_covariance;
  ClockModel clock;
  double offset_sigma = 0.0;
};

struct ProtocolTiming {
  double frame_length = 0.1;   // T_f, seconds
  double slot_length = 0.005;  // T_s, seconds
  std::size_t slots = 20;      // N_s
  std::size_t frames = 5;      // N_f

  void validate() const;
  /// Global transmit instant of anchor slot `anchor` in frame `frame` (both zero-based).
  [[nodiscard]] double transmit_time(std::size_t frame, std::size_t anchor) const {
    return static_cast<double>(frame) * frame_length + static_cast<double>(anchor) * slot_length;
  }
};

struct Scenario {
  int dimension = 2;
  std::vector<AnchorDef> anchors;
  ClockModel target_clock;
  Trajectory trajectory;
  NoiseModel noise;
  ProtocolTiming timing;

  void validate() const;
  [[nodiscard]] std::size_t anchor_count() const { return anchors.size(); }
};

/// One-way propagation delay from the anchor's true position to the target at global t.
[[nodiscard]] double true_toa(const AnchorDef& anchor, const Trajectory& trajectory, double t);

/// true_toa(i) - true_toa(j). Throws InvalidArgument when i and j are the same anchor.
[[nodiscard]] double true_tdoa(const AnchorDef& i, const AnchorDef& j, const Trajectory& trajectory,
                               double t);

enum class MotionKind { Static, Linear, Circular, Accelerated };

/// Randomised-scenario recipe. Defaults reproduce the reference simulation setting.
struct ScenarioConfig {
  int dimension = 2;
  std::size_t anchor_count = 10;
  double area_side = 2000.0;  // anchors uniform in a square (cube) of this side centred at 0
  ProtocolTiming timing;

  double drift_bound_ppm = 20.0;
  double offset_bound = 1e-3;
  bool ideal_target_clock = false;
  bool ideal_anchor_clocks = false;

  double sigma_t_m = 0.0;
  double sigma_r_m = 0.0316227766016837933;  // sqrt(1e-3) m, i.e. -30 dB m^2
  double sigma_phi = 1e-11;
  double sigma_p = 0.0;

  MotionKind motion = MotionKind::Linear;
  double v_max = 10.0;
  double r_max = 100.0;
  double a_max = 5.0;

  /// Optional fixed anchor layout (one position per anchor); empty means random placement.
  std::vector<Vector> anchor_positions;

  void validate() const;
  [[nodiscard]] NoiseModel noise_model() const;
};

Scenario sample_scenario(const ScenarioConfig& config, std::mt19937_64& rng);

}  // namespace ptdoa

#endif  // PTDOA_SCENARIO_HPP
