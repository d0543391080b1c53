#ifndef PTDOA_ESTIMATOR_HPP
#define PTDOA_ESTIMATOR_HPP

#include <vector>

#include "ptdoa/polynomial.hpp"
#include "ptdoa/protocol.hpp"

namespace ptdoa {

/// Coefficient difference between the two TOA polynomials of a pair for the l-th power,
/// given reception timestamps of anchor i (frames m, p) and anchor j (frames n, q).
/// Identically zero for l in {0, 1}.
template <typename Scalar>
Scalar delta_a(int l, Scalar t_ui_m, Scalar t_uj_n, Scalar t_ui_p, Scalar t_uj_q) {
  return (ipow(t_ui_m, l) - ipow(t_uj_n, l)) * (t_ui_p - t_uj_q) -
         (ipow(t_ui_p, l) - ipow(t_uj_q, l)) * (t_ui_m - t_uj_n);
}

/// How message frames are paired into one difference equation.
enum class Differencing {
  Successive,  // m = q = s, n = p = s + 1
  SameFrame,   // m = n = s, p = q = s + 1; ill-posed under periodic broadcast
};

/// Frame indices (m, n, p, q) used by one equation: i's m-th and p-th, j's n-th and q-th.
struct FrameQuad {
  std::size_t m = 0, n = 0, p = 0, q = 0;
};

[[nodiscard]] FrameQuad frame_quad(Differencing scheme, std::size_t s);

/// Linear maps (rows: equations, cols: frames) from each independent noise source
/// into the equation noise vector.
struct NoiseMaps {
  Matrix offset_i, offset_j;  // anchor clock-offset estimate errors
  Matrix tx_i, tx_j;          // transmit timestamp noise
  Matrix rx_i, rx_j;          // reception timestamp noise at the target
};

/// b = A gamma + eta for one anchor pair, times re-centred at `epoch`.
struct EquationSystem {
  AnchorPair pair;
  Differencing scheme = Differencing::Successive;
  Matrix A;
  Vector b;
  Matrix sigma_eta;
  double epoch = 0.0;
  std::vector<FrameQuad> rows;
  NoiseMaps maps;
  // Per-frame noise stds that weight the maps.
  Vector offset_sigma_i, offset_sigma_j;
  double tx_sigma = 0.0;
  double rx_sigma = 0.0;

  [[nodiscard]] Eigen::Index equations() const { return A.rows(); }
  [[nodiscard]] Eigen::Index order() const { return A.cols(); }
};

/// Whitened coefficient-matrix condition number above which a system is rejected.
inline constexpr double kIllPosedCondition = 1e12;

/// Builds one equation per successive frame pair. Requires frames >= max(order + 1, 2).
EquationSystem build_system(const CampaignLog& log, AnchorPair pair, int order,
                            Differencing scheme = Differencing::Successive);

inline EquationSystem build_stds_system(const CampaignLog& log, AnchorPair pair, int order) {
  return build_system(log, pair, order, Differencing::Successive);
}

/// TDOA polynomial in (t_u - epoch) with coefficient covariance.
struct TdoaPolyModel {
  AnchorPair pair;
  Vector gamma;
  Matrix covariance;
  double epoch = 0.0;
  double condition = 0.0;  // of the whitened coefficient matrix

  [[nodiscard]] Eigen::Index order() const { return gamma.size(); }
};

struct TdoaEstimate {
  double tdoa = 0.0;      // seconds
  double variance = 0.0;  // seconds^2
};

/// Condition number of the whitened coefficient matrix; +inf on exact rank loss.
[[nodiscard]] double whitened_condition(const EquationSystem& system);

/// Weighted least squares by whitening and Householder QR.
/// Throws IllPosedSystem on rank deficiency or a non positive-definite noise covariance.
TdoaPolyModel solve_mwls(const EquationSystem& system);

[[nodiscard]] TdoaEstimate eval_tdoa(const TdoaPolyModel& model, double target_local);

/// Same polynomial expressed about a different epoch.
[[nodiscard]] TdoaPolyModel rebase(const TdoaPolyModel& model, double new_epoch);

std::vector<TdoaEstimate> estimate_pair(const CampaignLog& log, AnchorPair pair, int order,
                                        const std::vector<double>& query_times);

enum class PairSet {
  Set1,  // {(1,2)}
  Set2,  // {(1,j)}
  Set3,  // all i < j, lexicographic
};

[[nodiscard]] std::vector<AnchorPair> anchor_pairs(PairSet set, std::size_t anchor_count);

enum class QueryPolicy {
  FrameStarts,          // target clock at each frame start
  ReceptionsOfSecond,   // target's reception instants of anchor j
};

[[nodiscard]] std::vector<double> query_times(const CampaignLog& log, AnchorPair pair, QueryPolicy policy);

}  // namespace ptdoa

#endif  // PTDOA_ESTIMATOR_HPP
