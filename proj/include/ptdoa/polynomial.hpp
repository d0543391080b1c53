#ifndef PTDOA_POLYNOMIAL_HPP
#define PTDOA_POLYNOMIAL_HPP

#include <Eigen/Dense>

namespace ptdoa {

/// Row-wise powers [1, t, ..., t^(L-1)] of each entry of `times`.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> vandermonde(
    const Eigen::MatrixBase<Derived>& times, Eigen::Index order) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> v(times.size(), order);
  for (Eigen::Index r = 0; r < times.size(); ++r) {
    Scalar p(1);
    for (Eigen::Index c = 0; c < order; ++c) {
      v(r, c) = p;
      p *= times(r);
    }
  }
  return v;
}

/// Power vector nu_t = [1, t, ..., t^(L-1)].
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> power_vector(Scalar t, Eigen::Index order) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nu(order);
  Scalar p(1);
  for (Eigen::Index c = 0; c < order; ++c) {
    nu(c) = p;
    p *= t;
  }
  return nu;
}

/// Integer power with a zeroth power of exactly one.
template <typename Scalar>
Scalar ipow(Scalar x, int l) {
  Scalar r(1);
  for (int k = 0; k < l; ++k) r *= x;
  return r;
}

/// Re-expansion of a polynomial in (t - e) about e + shift: gamma' = T gamma.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> taylor_shift(Eigen::Index order, Scalar shift) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> t =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(order, order);
  for (Eigen::Index l = 0; l < order; ++l) {
    Scalar binom(1);
    for (Eigen::Index k = l; k >= 0; --k) {
      // binom == C(l, k)
      t(k, l) = binom * ipow(shift, static_cast<int>(l - k));
      if (k > 0) binom = binom * Scalar(k) / Scalar(l - k + 1);
    }
  }
  return t;
}

}  // namespace ptdoa

#endif  // PTDOA_POLYNOMIAL_HPP
