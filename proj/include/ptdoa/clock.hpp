#ifndef PTDOA_CLOCK_HPP
#define PTDOA_CLOCK_HPP

#include <random>

#include "ptdoa/types.hpp"

namespace ptdoa {

/// Affine node clock: local = drift * global + offset.
struct ClockModel {
  double drift = 1.0;   // omega, dimensionless
  double offset = 0.0;  // phi, seconds

  /// Calibration slope, 1 / omega.
  [[nodiscard]] double alpha() const { return 1.0 / drift; }
  /// Calibration intercept, -phi / omega.
  [[nodiscard]] double beta() const { return -offset / drift; }
  [[nodiscard]] bool valid() const { return drift > 0.0; }

  static ClockModel ideal() { return {}; }
};

/// Timestamp and side-information noise levels. All timing stds in seconds.
struct NoiseModel {
  double sigma_t = 0.0;    // transmission timestamp
  double sigma_r = 0.0;    // reception timestamp
  double sigma_phi = 0.0;  // anchor clock-offset estimate
  double sigma_p = 0.0;    // anchor position, metres per axis

  void validate() const;

  /// Variance of one concurrent-measurement TDOA, 2(st^2 + sr^2 + sphi^2), seconds^2.
  [[nodiscard]] double tdoa_variance() const {
    return 2.0 * (sigma_t * sigma_t + sigma_r * sigma_r + sigma_phi * sigma_phi);
  }

  static NoiseModel none() { return {}; }
};

[[nodiscard]] double local_time(const ClockModel& clock, double global_seconds);

/// Inverse of local_time. Throws InvalidArgument when drift <= 0.
[[nodiscard]] double global_time(const ClockModel& clock, double local_seconds);

/// Offset of the local clock from global time at a global instant, local_time(t) - t.
[[nodiscard]] double offset_at(const ClockModel& clock, double global_seconds);

/// Draws drift = 1 + U[-b, b] ppm and offset = U[-offset_bound, offset_bound].
ClockModel sample_clock(double drift_bound_ppm, double offset_bound, std::mt19937_64& rng);

}  // namespace ptdoa

#endif  // PTDOA_CLOCK_HPP
