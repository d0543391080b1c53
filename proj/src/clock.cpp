#include "ptdoa/clock.hpp"

#include <cmath>

namespace ptdoa {

void NoiseModel::validate() const {
  for (double s : {sigma_t, sigma_r, sigma_phi, sigma_p}) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw InvalidArgument("noise standard deviations must be finite and non-negative");
    }
  }
}

double local_time(const ClockModel& clock, double global_seconds) {
  return clock.drift * global_seconds + clock.offset;
}

double global_time(const ClockModel& clock, double local_seconds) {
  if (!clock.valid()) throw InvalidArgument("clock drift must be positive");
  // (t_local - phi) / omega rounds once less than alpha * t_local + beta.
  return (local_seconds - clock.offset) / clock.drift;
}

double offset_at(const ClockModel& clock, double global_seconds) {
  return (clock.drift - 1.0) * global_seconds + clock.offset;
}

ClockModel sample_clock(double drift_bound_ppm, double offset_bound, std::mt19937_64& rng) {
  if (drift_bound_ppm < 0.0 || offset_bound < 0.0) {
    throw InvalidArgument("clock bounds must be non-negative");
  }
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  ClockModel clock;
  clock.drift = 1.0 + drift_bound_ppm * 1e-6 * unit(rng);
  clock.offset = offset_bound * unit(rng);
  return clock;
}

}  // namespace ptdoa
