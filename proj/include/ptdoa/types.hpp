#ifndef PTDOA_TYPES_HPP
#define PTDOA_TYPES_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ptdoa {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Propagation speed in m/s.
inline constexpr double kSpeedOfLight = 299792458.0;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on user-supplied data or configuration was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The linear system for a pair cannot be solved reliably (rank loss, bad covariance).
class IllPosedSystem : public Error {
 public:
  using Error::Error;
};

/// Anchor geometry does not admit a position fix.
class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

/// Ordered anchor pair, zero-based indices. The TDOA of a pair is TOA(i) - TOA(j).
struct AnchorPair {
  std::size_t i = 0;
  std::size_t j = 0;

  [[nodiscard]] AnchorPair swapped() const { return {j, i}; }
  friend bool operator==(const AnchorPair&, const AnchorPair&) = default;
};

}  // namespace ptdoa

#endif  // PTDOA_TYPES_HPP
