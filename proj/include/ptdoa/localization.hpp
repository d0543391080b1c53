#ifndef PTDOA_LOCALIZATION_HPP
#define PTDOA_LOCALIZATION_HPP

#include <span>
#include <vector>

#include "ptdoa/estimator.hpp"

namespace ptdoa {

enum class CovarianceMode {
  Diagonal,    // per-pair variances only
  Structured,  // off-diagonals at half the mean of the two variances
};

/// Reported anchor positions and covariances, indexed by anchor id.
struct AnchorInfo {
  std::vector<Vector> positions;
  std::vector<Matrix> covariances;
};

[[nodiscard]] AnchorInfo reported_anchors(const CampaignLog& log);

/// Instantaneous TDOAs to a common reference anchor at one target-local epoch.
struct TdoaFixInput {
  std::size_t reference = 0;
  Vector tdoas;  // seconds, tau_{i,ref} for the non-reference anchors in ascending id
  Matrix q;      // seconds^2
  AnchorInfo anchors;
  double epoch = 0.0;
};

struct PositionFix {
  Vector position;
  Matrix covariance;  // metres^2
  double epoch = 0.0;
  Matrix g_tdoa;   // d position / d tdoas, metres per second
  Matrix g_anchor; // d position / d stacked anchor positions
  double residual_norm = 0.0;  // whitened first-stage residual
  double condition = 0.0;      // whitened first-stage design matrix
  bool stage2_fallback = false;
};

/// Combines pair models (i, reference) evaluated at `epoch` into one fix input.
/// Throws InvalidArgument when a model's second anchor is not the reference.
TdoaFixInput assemble_fix_input(std::span<const TdoaPolyModel> models, std::size_t reference, double epoch,
                                CovarianceMode mode, AnchorInfo anchors);

/// Two-stage closed-form weighted least squares on hyperbolic range differences,
/// propagating anchor-position uncertainty. Throws DegenerateGeometry.
PositionFix multilaterate(const TdoaFixInput& input, int dimension);

/// MWLS models for every pair (i, reference), i ascending.
std::vector<TdoaPolyModel> fit_reference_models(const CampaignLog& log, int order, std::size_t reference = 0);

PositionFix localize_target(const CampaignLog& log, int order, double target_local,
                            CovarianceMode mode = CovarianceMode::Diagonal, std::size_t reference = 0);

/// One fix per frame start, reusing a single set of pair models.
std::vector<PositionFix> localize_frames(const CampaignLog& log, int order,
                                         CovarianceMode mode = CovarianceMode::Diagonal,
                                         std::size_t reference = 0);

}  // namespace ptdoa

#endif  // PTDOA_LOCALIZATION_HPP
