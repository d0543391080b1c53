#include "ptdoa/scenario.hpp"

#include <cmath>
#include <numbers>

namespace ptdoa {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_dim(const Vector& v, int dimension, const char* what) {
  if (v.size() != dimension) throw InvalidArgument(std::string(what) + " has wrong dimension");
}

Vector random_direction(int dimension, std::mt19937_64& rng) {
  if (dimension == 2) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const double a = angle(rng);
    Vector d(2);
    d << std::cos(a), std::sin(a);
    return d;
  }
  std::normal_distribution<double> gauss;
  Vector d(dimension);
  do {
    for (int k = 0; k < dimension; ++k) d[k] = gauss(rng);
  } while (d.norm() < 1e-12);
  return d.normalized();
}

/// Unit vector orthogonal to `heading`, rotation sense chosen by `sign`.
Vector orthogonal_unit(const Vector& heading, double sign, std::mt19937_64& rng) {
  if (heading.size() == 2) {
    Vector n(2);
    n << -heading[1], heading[0];
    return sign * n;
  }
  Vector n = random_direction(static_cast<int>(heading.size()), rng);
  n -= n.dot(heading) * heading;
  while (n.norm() < 1e-9) {
    n = random_direction(static_cast<int>(heading.size()), rng);
    n -= n.dot(heading) * heading;
  }
  return sign * n.normalized();
}

}  // namespace

void Trajectory::validate(int dimension) const {
  check_dim(initial_position, dimension, "initial position");
  std::visit(Overloaded{
                 [](const StaticMotion&) {},
                 [&](const LinearMotion& m) { check_dim(m.velocity, dimension, "velocity"); },
                 [&](const CircularMotion& m) {
                   if (!(m.radius > 0.0)) throw InvalidArgument("circular radius must be positive");
                   check_dim(m.heading, dimension, "heading");
                   check_dim(m.normal, dimension, "normal");
                 },
                 [&](const AcceleratedMotion& m) {
                   check_dim(m.velocity, dimension, "velocity");
                   check_dim(m.acceleration, dimension, "acceleration");
                 },
             },
             motion);
}

Vector position_at(const Trajectory& trajectory, double t) {
  const Vector& p0 = trajectory.initial_position;
  return std::visit(Overloaded{
                        [&](const StaticMotion&) -> Vector { return p0; },
                        [&](const LinearMotion& m) -> Vector { return p0 + m.velocity * t; },
                        [&](const CircularMotion& m) -> Vector {
                          const double angle = m.speed * t / m.radius;
                          const Vector centre = p0 + m.radius * m.normal;
                          return centre + m.radius * (std::sin(angle) * m.heading -
                                                      std::cos(angle) * m.normal);
                        },
                        [&](const AcceleratedMotion& m) -> Vector {
                          return p0 + m.velocity * t + 0.5 * m.acceleration * t * t;
                        },
                    },
                    trajectory.motion);
}

void ProtocolTiming::validate() const {
  if (!(frame_length > 0.0) || !(slot_length > 0.0)) {
    throw InvalidArgument("frame and slot lengths must be positive");
  }
  if (slots == 0) throw InvalidArgument("protocol needs at least one slot");
  const double expected = static_cast<double>(slots) * slot_length;
  if (std::abs(expected - frame_length) > 1e-9 * frame_length) {
    throw InvalidArgument("frame length must equal slots * slot length");
  }
  if (frames < 2) throw InvalidArgument("at least two frames are required");
}

void Scenario::validate() const {
  if (dimension != 2 && dimension != 3) throw InvalidArgument("dimension must be 2 or 3");
  timing.validate();
  noise.validate();
  if (anchors.size() < 2) throw InvalidArgument("at least two anchors are required");
  if (anchors.size() > timing.slots) throw InvalidArgument("more anchors than slots");
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    const auto& a = anchors[k];
    if (a.id != k) throw InvalidArgument("anchor ids must match their slot order");
    check_dim(a.true_position, dimension, "anchor position");
    check_dim(a.reported_position, dimension, "reported anchor position");
    if (a.position_covariance.rows() != dimension || a.position_covariance.cols() != dimension) {
      throw InvalidArgument("anchor position covariance has wrong shape");
    }
    if (!a.clock.valid() || !target_clock.valid()) throw InvalidArgument("clock drift must be positive");
    if (a.offset_sigma < 0.0) throw InvalidArgument("offset sigma must be non-negative");
  }
  trajectory.validate(dimension);
}

double true_toa(const AnchorDef& anchor, const Trajectory& trajectory, double t) {
  return (position_at(trajectory, t) - anchor.true_position).norm() / kSpeedOfLight;
}

double true_tdoa(const AnchorDef& i, const AnchorDef& j, const Trajectory& trajectory, double t) {
  if (i.id == j.id) throw InvalidArgument("TDOA needs two distinct anchors");
  const Vector p = position_at(trajectory, t);
  return ((p - i.true_position).norm() - (p - j.true_position).norm()) / kSpeedOfLight;
}

void ScenarioConfig::validate() const {
  if (dimension != 2 && dimension != 3) throw InvalidArgument("dimension must be 2 or 3");
  timing.validate();
  if (anchor_count < 2) throw InvalidArgument("at least two anchors are required");
  if (anchor_count > timing.slots) throw InvalidArgument("anchor count exceeds slot count");
  if (!anchor_positions.empty()) {
    if (anchor_positions.size() != anchor_count) {
      throw InvalidArgument("explicit anchor layout must list every anchor");
    }
    for (const auto& p : anchor_positions) check_dim(p, dimension, "anchor position");
  }
  for (double v : {area_side, drift_bound_ppm, offset_bound, v_max, r_max, a_max}) {
    if (!(v >= 0.0)) throw InvalidArgument("scenario bounds must be non-negative");
  }
  if (motion == MotionKind::Circular && !(r_max > 0.0)) {
    throw InvalidArgument("circular motion needs a positive maximum radius");
  }
  noise_model().validate();
}

NoiseModel ScenarioConfig::noise_model() const {
  return {sigma_t_m / kSpeedOfLight, sigma_r_m / kSpeedOfLight, sigma_phi, sigma_p};
}

Scenario sample_scenario(const ScenarioConfig& config, std::mt19937_64& rng) {
  config.validate();
  const int dim = config.dimension;
  Scenario sc;
  sc.dimension = dim;
  sc.timing = config.timing;
  sc.noise = config.noise_model();

  std::uniform_real_distribution<double> coord(-0.5 * config.area_side, 0.5 * config.area_side);
  std::normal_distribution<double> gauss;
  const Matrix cov = Matrix::Identity(dim, dim) * (config.sigma_p * config.sigma_p);

  sc.anchors.resize(config.anchor_count);
  for (std::size_t k = 0; k < config.anchor_count; ++k) {
    auto& a = sc.anchors[k];
    a.id = k;
    if (config.anchor_positions.empty()) {
      a.true_position.resize(dim);
      for (int d = 0; d < dim; ++d) a.true_position[d] = coord(rng);
    } else {
      a.true_position = config.anchor_positions[k];
    }
  }
  for (auto& a : sc.anchors) {
    a.clock = config.ideal_anchor_clocks
                  ? ClockModel::ideal()
                  : sample_clock(config.drift_bound_ppm, config.offset_bound, rng);
    a.offset_sigma = config.sigma_phi;
    a.position_covariance = cov;
    a.reported_position = a.true_position;
    if (config.sigma_p > 0.0) {
      for (int d = 0; d < dim; ++d) a.reported_position[d] += config.sigma_p * gauss(rng);
    }
  }
  sc.target_clock = config.ideal_target_clock
                        ? ClockModel::ideal()
                        : sample_clock(config.drift_bound_ppm, config.offset_bound, rng);

  sc.trajectory.initial_position = Vector::Zero(dim);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (config.motion) {
    case MotionKind::Static:
      sc.trajectory.motion = StaticMotion{};
      break;
    case MotionKind::Linear: {
      const Vector dir = random_direction(dim, rng);
      sc.trajectory.motion = LinearMotion{config.v_max * unit(rng) * dir};
      break;
    }
    case MotionKind::Circular: {
      const Vector dir = random_direction(dim, rng);
      const double speed = config.v_max * unit(rng);
      double radius = 0.0;
      while (!(radius > 0.0)) radius = config.r_max * unit(rng);
      const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
      sc.trajectory.motion = CircularMotion{speed, radius, dir, orthogonal_unit(dir, sign, rng)};
      break;
    }
    case MotionKind::Accelerated: {
      const Vector dir = random_direction(dim, rng);
      const double speed = config.v_max * unit(rng);
      const double accel = config.a_max * unit(rng);
      sc.trajectory.motion = AcceleratedMotion{speed * dir, accel * dir};
      break;
    }
  }
  sc.validate();
  return sc;
}

}  // namespace ptdoa
