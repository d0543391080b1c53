#include "ptdoa/localization.hpp"

#include <cmath>
#include <limits>

#include "ptdoa/analysis.hpp"

namespace ptdoa {
namespace {

constexpr double kDegenerateCondition = 1e12;

struct WeightedSolution {
  Vector theta;
  Matrix gain;  // (G^T W G)^-1 G^T W
  double condition = 0.0;
  double residual = 0.0;
};

/// Minimises (h - G theta)^T psi^-1 (h - G theta). A zero psi falls back to unit weights.
WeightedSolution weighted_solve(const Matrix& g, const Vector& h, const Matrix& psi) {
  Matrix gw = g;
  Vector hw = h;
  Matrix whitener;  // L^-1, so that gain = (L^-1 G)^+ L^-1
  const bool unit = psi.isZero(0.0);
  Eigen::LLT<Matrix> llt;
  if (!unit) {
    llt.compute(0.5 * (psi + psi.transpose()));
    if (llt.info() != Eigen::Success) throw InvalidArgument("measurement covariance is not positive definite");
    gw = llt.matrixL().solve(g);
    hw = llt.matrixL().solve(h);
  }
  const Eigen::JacobiSVD<Matrix> svd(gw);
  const Vector& sv = svd.singularValues();
  WeightedSolution out;
  out.condition = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();
  if (!(out.condition <= kDegenerateCondition)) throw DegenerateGeometry("anchor geometry is degenerate");

  const Eigen::HouseholderQR<Matrix> qr(gw);
  const Eigen::Index n = gw.cols();
  const auto r = qr.matrixQR().topLeftCorner(n, n).triangularView<Eigen::Upper>();
  const Matrix q1 = qr.householderQ() * Matrix::Identity(gw.rows(), n);
  Matrix pinv = r.solve(q1.transpose());  // (Gw)^+
  out.gain = unit ? pinv : Matrix(llt.matrixL().transpose().solve(pinv.transpose()).transpose());
  out.theta = pinv * hw;
  out.residual = (hw - gw * out.theta).norm();
  return out;
}

}  // namespace

AnchorInfo reported_anchors(const CampaignLog& log) {
  AnchorInfo info;
  for (std::size_t a = 0; a < log.anchors(); ++a) {
    const auto& msg = log.message(0, a);
    info.positions.push_back(msg.reported_position);
    info.covariances.push_back(msg.position_covariance);
  }
  return info;
}

TdoaFixInput assemble_fix_input(std::span<const TdoaPolyModel> models, std::size_t reference, double epoch,
                                CovarianceMode mode, AnchorInfo anchors) {
  const auto n = static_cast<Eigen::Index>(models.size());
  TdoaFixInput input;
  input.reference = reference;
  input.epoch = epoch;
  input.tdoas.resize(n);
  input.q = Matrix::Zero(n, n);
  std::size_t previous = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& model = models[static_cast<std::size_t>(k)];
    if (model.pair.j != reference || model.pair.i == reference) {
      throw InvalidArgument("every pair must end at the reference anchor");
    }
    if (k > 0 && model.pair.i <= previous) throw InvalidArgument("pairs must be in ascending anchor order");
    previous = model.pair.i;
    const TdoaEstimate est = eval_tdoa(model, epoch);
    input.tdoas[k] = est.tdoa;
    input.q(k, k) = est.variance;
  }
  if (mode == CovarianceMode::Structured) {
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b)
        if (a != b) input.q(a, b) = 0.25 * (input.q(a, a) + input.q(b, b));
  }
  input.anchors = std::move(anchors);
  return input;
}

PositionFix multilaterate(const TdoaFixInput& input, int dimension) {
  const auto& pos = input.anchors.positions;
  const std::size_t n_anchors = pos.size();
  const std::size_t ref = input.reference;
  const Eigen::Index k = dimension;
  if (dimension != 2 && dimension != 3) throw InvalidArgument("dimension must be 2 or 3");
  if (n_anchors < static_cast<std::size_t>(dimension) + 2) {
    throw InvalidArgument("need at least dimension + 2 anchors for a TDOA fix");
  }
  if (ref >= n_anchors) throw InvalidArgument("reference anchor out of range");
  const auto rows = static_cast<Eigen::Index>(n_anchors - 1);
  if (input.tdoas.size() != rows || input.q.rows() != rows || input.q.cols() != rows) {
    throw InvalidArgument("TDOA vector and covariance must cover every non-reference anchor");
  }
  const bool has_anchor_cov = !input.anchors.covariances.empty();
  Matrix anchor_cov;
  if (has_anchor_cov) {
    if (input.anchors.covariances.size() != n_anchors) throw InvalidArgument("one covariance per anchor");
    anchor_cov = stacked_anchor_covariance(input.anchors.covariances);
  } else {
    anchor_cov = Matrix::Zero(k * static_cast<Eigen::Index>(n_anchors), k * static_cast<Eigen::Index>(n_anchors));
  }

  // Work relative to the reported reference position; the equations are translation-equivariant.
  const Vector origin = pos[ref];
  std::vector<std::size_t> others;
  for (std::size_t a = 0; a < n_anchors; ++a)
    if (a != ref) others.push_back(a);
  Matrix s(k, rows);
  for (Eigen::Index r = 0; r < rows; ++r) s.col(r) = pos[others[static_cast<std::size_t>(r)]] - origin;
  const Vector range_diff = kSpeedOfLight * input.tdoas;
  const Matrix q_m = (kSpeedOfLight * kSpeedOfLight) * input.q;

  Matrix g1(rows, k + 1);
  Vector h1(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    g1.block(r, 0, 1, k) = -2.0 * s.col(r).transpose();
    g1(r, k) = -2.0 * range_diff[r];
    h1[r] = range_diff[r] * range_diff[r] - s.col(r).squaredNorm();
  }

  // Jacobians of the first-stage equation error w.r.t. range differences and anchor positions.
  auto error_maps = [&](const Vector& u, Matrix& b1, Matrix& d1) {
    b1 = Matrix::Zero(rows, rows);
    d1 = Matrix::Zero(rows, k * static_cast<Eigen::Index>(n_anchors));
    for (Eigen::Index r = 0; r < rows; ++r) {
      const std::size_t a = others[static_cast<std::size_t>(r)];
      b1(r, r) = 2.0 * (u - s.col(r)).norm();
      d1.block(r, static_cast<Eigen::Index>(a) * k, 1, k) = 2.0 * (u - s.col(r)).transpose();
      d1.block(r, static_cast<Eigen::Index>(ref) * k, 1, k) = -2.0 * u.transpose();
    }
  };

  PositionFix fix;
  fix.epoch = input.epoch;

  WeightedSolution st1 = weighted_solve(g1, h1, q_m);
  Vector u = st1.theta.head(k);
  Matrix b1, d1;
  Matrix gain_tdoa, gain_anchor;
  for (int pass = 0; pass < 2; ++pass) {
    error_maps(u, b1, d1);
    const Matrix psi1 = b1 * q_m * b1.transpose() + d1 * anchor_cov * d1.transpose();
    st1 = weighted_solve(g1, h1, psi1);
    const Vector u1 = st1.theta.head(k);
    const double r_ref = st1.theta[k];
    fix.residual_norm = st1.residual;
    fix.condition = st1.condition;

    // Stage 2: impose r_ref = |u|, linearised at the first-stage position.
    const double dist = u1.norm();
    bool ok = dist > 0.0 && std::isfinite(dist);
    if (ok) {
      const Vector rho = u1 / dist;
      Matrix g2(k + 1, k);
      g2.topRows(k) = Matrix::Identity(k, k);
      g2.row(k) = rho.transpose();
      Vector h2 = Vector::Zero(k + 1);
      h2[k] = r_ref - dist;
      Matrix f_s = Matrix::Zero(k + 1, d1.cols());
      f_s.block(k, static_cast<Eigen::Index>(ref) * k, 1, k) = -rho.transpose();
      const Matrix e_r = st1.gain * b1;
      const Matrix e_s = st1.gain * d1 - f_s;
      const Matrix psi2 = e_r * q_m * e_r.transpose() + e_s * anchor_cov * e_s.transpose();
      try {
        const WeightedSolution st2 = weighted_solve(g2, h2, psi2);
        if (st2.theta.allFinite()) {
          u = u1 + st2.theta;
          gain_tdoa = kSpeedOfLight * st2.gain * e_r;
          gain_anchor = st2.gain * e_s;
        } else {
          ok = false;
        }
      } catch (const Error&) {
        ok = false;
      }
    }
    fix.stage2_fallback = !ok;
    if (!ok) {
      u = u1;
      gain_tdoa = kSpeedOfLight * st1.gain.topRows(k) * b1;
      gain_anchor = st1.gain.topRows(k) * d1;
    }
  }

  fix.position = u + origin;
  fix.g_tdoa = gain_tdoa;
  fix.g_anchor = gain_anchor;
  fix.covariance = position_covariance_prediction(gain_tdoa, gain_anchor, input.q, anchor_cov);
  return fix;
}

std::vector<TdoaPolyModel> fit_reference_models(const CampaignLog& log, int order, std::size_t reference) {
  if (reference >= log.anchors()) throw InvalidArgument("reference anchor out of range");
  std::vector<TdoaPolyModel> models;
  for (std::size_t a = 0; a < log.anchors(); ++a) {
    if (a == reference) continue;
    models.push_back(solve_mwls(build_stds_system(log, {a, reference}, order)));
  }
  return models;
}

PositionFix localize_target(const CampaignLog& log, int order, double target_local, CovarianceMode mode,
                            std::size_t reference) {
  if (log.anchors() < static_cast<std::size_t>(log.scenario.dimension) + 2) {
    throw InvalidArgument("too few anchors to localize");
  }
  const auto models = fit_reference_models(log, order, reference);
  return multilaterate(assemble_fix_input(models, reference, target_local, mode, reported_anchors(log)),
                       log.scenario.dimension);
}

std::vector<PositionFix> localize_frames(const CampaignLog& log, int order, CovarianceMode mode,
                                         std::size_t reference) {
  if (log.anchors() < static_cast<std::size_t>(log.scenario.dimension) + 2) {
    throw InvalidArgument("too few anchors to localize");
  }
  const auto models = fit_reference_models(log, order, reference);
  const AnchorInfo anchors = reported_anchors(log);
  std::vector<PositionFix> fixes;
  for (double t : log.frame_start_local_times()) {
    fixes.push_back(multilaterate(assemble_fix_input(models, reference, t, mode, anchors), log.scenario.dimension));
  }
  return fixes;
}

}  // namespace ptdoa
