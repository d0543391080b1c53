#ifndef PTDOA_ANALYSIS_HPP
#define PTDOA_ANALYSIS_HPP

#include <span>
#include <vector>

#include "ptdoa/clock.hpp"
#include "ptdoa/polynomial.hpp"
#include "ptdoa/scenario.hpp"

namespace ptdoa {

/// Variance of one concurrent-measurement TDOA, seconds^2.
[[nodiscard]] inline double sigma_n2(const NoiseModel& noise) { return noise.tdoa_variance(); }

/// Bound without a motion model: sigma_n^2 I.
[[nodiscard]] Matrix crlb1(std::size_t frames, double sigma_n2);

struct Crlb2 {
  Matrix tdoa;   // frames x frames, sigma_n^2 times the projector onto span(V_u)
  Matrix gamma;  // order x order, sigma_n^2 (V_u^T V_u)^-1, times centred at times[0]
};

/// Bound under the order-L polynomial model at the given query times.
/// Throws InvalidArgument if the times do not support L coefficients.
Crlb2 crlb2(std::span<const double> times, int order, double sigma_n2);

/// diag(CRLB2): per-frame TDOA variance under the polynomial model.
[[nodiscard]] Vector framed_tdoa_variances(std::span<const double> times, int order, double sigma_n2);

/// Closed-form MWLS covariance under the tridiagonal noise approximation.
struct TheoreticalMwls {
  double r1 = 0.0;  // T_f + (i - j) T_s
  double r2 = 0.0;  // T_f - (i - j) T_s
  Matrix B;         // (N_f - 1) x N_f bidiagonal
  Matrix sigma_eta; // tridiagonal, seconds^2 * s^2
  Matrix D;         // B^T sigma_eta^-1 B sigma_n^2
  Matrix delta_D;   // -(1/N_f) s s^T with s alternating: the small-slot limit of D - I
  Matrix F1, F2;    // V^T V and V^T delta_D V on anchor i's reception times
  Matrix gamma_covariance;
  Matrix tdoa_covariance;  // at the query times
  // Small-slot form: D replaced by I + delta_D, so the information is F1 + F2.
  Matrix small_slot_gamma_covariance;
  Matrix small_slot_tdoa_covariance;
};

/// Query times are on the nominal protocol axis (anchor i receives at m T_f + i T_s).
TheoreticalMwls theoretical_mwls_covariance(AnchorPair pair, const ProtocolTiming& timing,
                                            std::span<const double> query_times, int order,
                                            const NoiseModel& noise);

/// Covariance of the N_a - 1 reference-anchor TDOAs under concurrent measurement:
/// `variance` on the diagonal, half of it elsewhere.
[[nodiscard]] Matrix localization_q(std::size_t anchor_count, double variance);

/// Localization CRLB (metres^2) for TDOAs to `reference` with covariance Q (seconds^2),
/// evaluated at the true target position. `anchor_covariance`, when non-empty, is the
/// block-diagonal K N_a covariance of the anchor positions, marginalised as a Gaussian prior.
Matrix localization_crlb(std::span<const Vector> anchors, std::size_t reference, const Vector& target,
                         const Matrix& q, const Matrix& anchor_covariance = Matrix());

/// G1 Q G1^T + G2 Sigma_pa G2^T.
template <typename D1, typename D2, typename D3, typename D4>
Matrix position_covariance_prediction(const Eigen::MatrixBase<D1>& g1, const Eigen::MatrixBase<D2>& g2,
                                      const Eigen::MatrixBase<D3>& q,
                                      const Eigen::MatrixBase<D4>& anchor_covariance) {
  Matrix out = g1 * q * g1.transpose();
  if (anchor_covariance.size() > 0) out += g2 * anchor_covariance * g2.transpose();
  return 0.5 * (out + out.transpose());
}

/// Block-diagonal stack of the anchors' position covariances.
[[nodiscard]] Matrix stacked_anchor_covariance(std::span<const Matrix> blocks);

}  // namespace ptdoa

#endif  // PTDOA_ANALYSIS_HPP
