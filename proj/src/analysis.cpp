#include "ptdoa/analysis.hpp"

#include <cmath>

namespace ptdoa {
namespace {

Matrix centred_vandermonde(std::span<const double> times, int order) {
  if (order < 1) throw InvalidArgument("model order must be at least 1");
  if (times.size() < static_cast<std::size_t>(order)) {
    throw InvalidArgument("need at least as many query times as coefficients");
  }
  Vector t(static_cast<Eigen::Index>(times.size()));
  for (std::size_t k = 0; k < times.size(); ++k) t[static_cast<Eigen::Index>(k)] = times[k] - times[0];
  return vandermonde(t, order);
}

}  // namespace

Matrix crlb1(std::size_t frames, double sigma_n2) {
  const auto n = static_cast<Eigen::Index>(frames);
  return sigma_n2 * Matrix::Identity(n, n);
}

Crlb2 crlb2(std::span<const double> times, int order, double sigma_n2) {
  const Matrix v = centred_vandermonde(times, order);
  const Eigen::ColPivHouseholderQR<Matrix> qr(v);
  if (qr.rank() < order) throw InvalidArgument("query times are not distinct enough for the model order");
  const Eigen::HouseholderQR<Matrix> hqr(v);
  const Matrix q1 = hqr.householderQ() * Matrix::Identity(v.rows(), order);
  const auto r = hqr.matrixQR().topLeftCorner(order, order).triangularView<Eigen::Upper>();
  const Matrix r_inv = r.solve(Matrix::Identity(order, order));
  return {sigma_n2 * q1 * q1.transpose(), sigma_n2 * r_inv * r_inv.transpose()};
}

Vector framed_tdoa_variances(std::span<const double> times, int order, double sigma_n2) {
  return crlb2(times, order, sigma_n2).tdoa.diagonal();
}

TheoreticalMwls theoretical_mwls_covariance(AnchorPair pair, const ProtocolTiming& timing,
                                            std::span<const double> query_times, int order,
                                            const NoiseModel& noise) {
  timing.validate();
  if (order < 1) throw InvalidArgument("model order must be at least 1");
  const auto n_frames = static_cast<Eigen::Index>(timing.frames);
  if (n_frames - 1 < order) throw InvalidArgument("need at least order + 1 frames");
  const double sn2 = sigma_n2(noise);

  TheoreticalMwls out;
  const double gap = (static_cast<double>(pair.i) - static_cast<double>(pair.j)) * timing.slot_length;
  out.r1 = timing.frame_length + gap;
  out.r2 = timing.frame_length - gap;

  const Eigen::Index rows = n_frames - 1;
  out.B = Matrix::Zero(rows, n_frames);
  out.sigma_eta = Matrix::Zero(rows, rows);
  for (Eigen::Index s = 0; s < rows; ++s) {
    out.B(s, s) = out.r1;
    out.B(s, s + 1) = out.r2;
    out.sigma_eta(s, s) = sn2 * (out.r1 * out.r1 + out.r2 * out.r2);
    if (s + 1 < rows) {
      out.sigma_eta(s, s + 1) = sn2 * out.r1 * out.r2;
      out.sigma_eta(s + 1, s) = sn2 * out.r1 * out.r2;
    }
  }

  // Nominal reception times of anchor i, re-centred like the estimator.
  const double epoch = static_cast<double>(std::min(pair.i, pair.j)) * timing.slot_length;
  Vector t_i(n_frames);
  for (Eigen::Index m = 0; m < n_frames; ++m) {
    t_i[m] = timing.transmit_time(static_cast<std::size_t>(m), pair.i) - epoch;
  }
  const Matrix v_i = vandermonde(t_i, order);

  Vector alt(n_frames);
  for (Eigen::Index k = 0; k < n_frames; ++k) alt[k] = (k % 2 == 0) ? -1.0 : 1.0;
  out.delta_D = -(alt * alt.transpose()) / static_cast<double>(n_frames);
  out.F1 = v_i.transpose() * v_i;
  out.F2 = v_i.transpose() * out.delta_D * v_i;

  // D = B^T sigma_eta^-1 B sigma_n^2 depends only on the tridiagonal shape.
  const Matrix shape = out.B * out.B.transpose();  // tridiag(r1^2 + r2^2, r1 r2)
  const Eigen::LLT<Matrix> llt(shape);
  if (llt.info() != Eigen::Success) throw InvalidArgument("tridiagonal noise covariance is singular");
  const Matrix whitened_b = llt.matrixL().solve(out.B);
  out.D = whitened_b.transpose() * whitened_b;

  const Matrix info = v_i.transpose() * out.D * v_i;
  out.gamma_covariance = sn2 * info.ldlt().solve(Matrix::Identity(order, order));
  Vector tq(static_cast<Eigen::Index>(query_times.size()));
  for (std::size_t k = 0; k < query_times.size(); ++k) tq[static_cast<Eigen::Index>(k)] = query_times[k] - epoch;
  const Matrix v_q = vandermonde(tq, order);
  out.tdoa_covariance = v_q * out.gamma_covariance * v_q.transpose();
  out.small_slot_gamma_covariance = sn2 * (out.F1 + out.F2).ldlt().solve(Matrix::Identity(order, order));
  out.small_slot_tdoa_covariance = v_q * out.small_slot_gamma_covariance * v_q.transpose();
  return out;
}

Matrix localization_q(std::size_t anchor_count, double variance) {
  if (anchor_count < 2) throw InvalidArgument("need at least two anchors");
  const auto n = static_cast<Eigen::Index>(anchor_count - 1);
  Matrix q = Matrix::Constant(n, n, 0.5 * variance);
  q.diagonal().setConstant(variance);
  return q;
}

Matrix localization_crlb(std::span<const Vector> anchors, std::size_t reference, const Vector& target,
                         const Matrix& q, const Matrix& anchor_covariance) {
  const std::size_t n = anchors.size();
  if (reference >= n) throw InvalidArgument("reference anchor out of range");
  const auto k = target.size();
  const auto rows = static_cast<Eigen::Index>(n - 1);
  if (q.rows() != rows || q.cols() != rows) throw InvalidArgument("Q must be (N_a - 1) square");

  std::vector<Vector> unit(n);
  for (std::size_t a = 0; a < n; ++a) {
    const Vector d = target - anchors[a];
    const double r = d.norm();
    if (!(r > 0.0)) throw DegenerateGeometry("target coincides with an anchor");
    unit[a] = d / r;
  }
  Matrix j_u(rows, k);
  Matrix j_s = Matrix::Zero(rows, static_cast<Eigen::Index>(k * n));
  Eigen::Index row = 0;
  for (std::size_t a = 0; a < n; ++a) {
    if (a == reference) continue;
    j_u.row(row) = (unit[a] - unit[reference]).transpose();
    j_s.block(row, static_cast<Eigen::Index>(a) * k, 1, k) = -unit[a].transpose();
    j_s.block(row, static_cast<Eigen::Index>(reference) * k, 1, k) = unit[reference].transpose();
    ++row;
  }
  Matrix cov = (kSpeedOfLight * kSpeedOfLight) * q;
  if (anchor_covariance.size() > 0) {
    if (anchor_covariance.rows() != j_s.cols()) throw InvalidArgument("anchor covariance has wrong size");
    cov += j_s * anchor_covariance * j_s.transpose();
  }
  const Eigen::LDLT<Matrix> cov_ldlt(cov);
  if (cov_ldlt.info() != Eigen::Success || !(cov_ldlt.vectorD().minCoeff() > 0.0)) {
    throw InvalidArgument("measurement covariance must be positive definite");
  }
  const Matrix fim = j_u.transpose() * cov_ldlt.solve(j_u);
  const Eigen::JacobiSVD<Matrix> svd(fim);
  const Vector& sv = svd.singularValues();
  if (!(sv[sv.size() - 1] > 1e-12 * sv[0])) throw DegenerateGeometry("anchor geometry is degenerate");
  Matrix crlb = fim.ldlt().solve(Matrix::Identity(k, k));
  return 0.5 * (crlb + crlb.transpose());
}

Matrix stacked_anchor_covariance(std::span<const Matrix> blocks) {
  Eigen::Index total = 0;
  for (const auto& b : blocks) total += b.rows();
  Matrix out = Matrix::Zero(total, total);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.block(at, at, b.rows(), b.cols()) = b;
    at += b.rows();
  }
  return out;
}

}  // namespace ptdoa
