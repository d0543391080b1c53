#include "ptdoa/estimator.hpp"

#include <cmath>
#include <limits>

namespace ptdoa {

FrameQuad frame_quad(Differencing scheme, std::size_t s) {
  if (scheme == Differencing::Successive) return {s, s + 1, s + 1, s};
  return {s, s, s + 1, s + 1};
}

EquationSystem build_system(const CampaignLog& log, AnchorPair pair, int order, Differencing scheme) {
  const std::size_t n_frames = log.frames();
  if (order < 1) throw InvalidArgument("model order must be at least 1");
  if (pair.i == pair.j) throw InvalidArgument("pair needs two distinct anchors");
  if (pair.i >= log.anchors() || pair.j >= log.anchors()) throw InvalidArgument("anchor index out of range");
  if (n_frames < 2 || n_frames < static_cast<std::size_t>(order) + 1) {
    throw InvalidArgument("not enough frames: need at least order + 1 and two frames");
  }

  EquationSystem sys;
  sys.pair = pair;
  sys.scheme = scheme;
  sys.epoch = std::min(log.reception(0, pair.i).rx_local, log.reception(0, pair.j).rx_local);

  // Re-centred reception times and offset-corrected transmit times.
  Vector rx_i(n_frames), rx_j(n_frames), tx_i(n_frames), tx_j(n_frames);
  sys.offset_sigma_i.resize(n_frames);
  sys.offset_sigma_j.resize(n_frames);
  for (std::size_t m = 0; m < n_frames; ++m) {
    const auto idx = static_cast<Eigen::Index>(m);
    rx_i[idx] = log.reception(m, pair.i).rx_local - sys.epoch;
    rx_j[idx] = log.reception(m, pair.j).rx_local - sys.epoch;
    const auto& mi = log.message(m, pair.i);
    const auto& mj = log.message(m, pair.j);
    tx_i[idx] = (mi.tx_local - mi.offset_estimate) - sys.epoch;
    tx_j[idx] = (mj.tx_local - mj.offset_estimate) - sys.epoch;
    sys.offset_sigma_i[idx] = mi.offset_sigma;
    sys.offset_sigma_j[idx] = mj.offset_sigma;
  }
  sys.tx_sigma = log.scenario.noise.sigma_t;
  sys.rx_sigma = log.scenario.noise.sigma_r;

  const auto rows = static_cast<Eigen::Index>(n_frames - 1);
  const auto cols = static_cast<Eigen::Index>(n_frames);
  sys.A.resize(rows, order);
  sys.b.resize(rows);
  for (Matrix* c : {&sys.maps.offset_i, &sys.maps.offset_j, &sys.maps.tx_i, &sys.maps.tx_j,
                    &sys.maps.rx_i, &sys.maps.rx_j}) {
    *c = Matrix::Zero(rows, cols);
  }

  for (Eigen::Index s = 0; s < rows; ++s) {
    const FrameQuad fq = frame_quad(scheme, static_cast<std::size_t>(s));
    sys.rows.push_back(fq);
    const auto m = static_cast<Eigen::Index>(fq.m), n = static_cast<Eigen::Index>(fq.n);
    const auto p = static_cast<Eigen::Index>(fq.p), q = static_cast<Eigen::Index>(fq.q);

    const double d_mn = rx_i[m] - rx_j[n];
    const double d_pq = rx_i[p] - rx_j[q];
    const double e_mn = tx_i[m] - tx_j[n];
    const double e_pq = tx_i[p] - tx_j[q];

    sys.b[s] = -e_mn * d_pq + e_pq * d_mn;
    double pow_m = 1.0, pow_p = 1.0;
    for (int l = 0; l < order; ++l) {
      sys.A(s, l) = pow_m * d_pq - pow_p * d_mn;
      pow_m *= rx_i[m];
      pow_p *= rx_i[p];
    }

    sys.maps.offset_i(s, m) += d_pq;
    sys.maps.offset_i(s, p) -= d_mn;
    sys.maps.offset_j(s, n) -= d_pq;
    sys.maps.offset_j(s, q) += d_mn;
    sys.maps.tx_i(s, m) -= d_pq;
    sys.maps.tx_i(s, p) += d_mn;
    sys.maps.tx_j(s, n) += d_pq;
    sys.maps.tx_j(s, q) -= d_mn;
    sys.maps.rx_i(s, m) += e_pq;
    sys.maps.rx_i(s, p) -= e_mn;
    sys.maps.rx_j(s, n) -= e_pq;
    sys.maps.rx_j(s, q) += e_mn;
  }

  const Vector var_oi = sys.offset_sigma_i.array().square();
  const Vector var_oj = sys.offset_sigma_j.array().square();
  const auto& c = sys.maps;
  sys.sigma_eta = c.offset_i * var_oi.asDiagonal() * c.offset_i.transpose() +
                  c.offset_j * var_oj.asDiagonal() * c.offset_j.transpose() +
                  (sys.tx_sigma * sys.tx_sigma) * (c.tx_i * c.tx_i.transpose() + c.tx_j * c.tx_j.transpose()) +
                  (sys.rx_sigma * sys.rx_sigma) * (c.rx_i * c.rx_i.transpose() + c.rx_j * c.rx_j.transpose());
  return sys;
}

namespace {

struct Whitened {
  Matrix A;
  Vector b;
  bool noiseless = false;
};

Whitened whiten(const EquationSystem& system) {
  const Matrix& s = system.sigma_eta;
  if (s.rows() != system.A.rows() || s.cols() != system.A.rows()) {
    throw IllPosedSystem("noise covariance shape does not match the equations");
  }
  if (!s.allFinite() || (s - s.transpose()).norm() > 1e-9 * s.norm()) {
    throw IllPosedSystem("noise covariance is not symmetric");
  }
  if (s.isZero(0.0)) return {system.A, system.b, true};
  const Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) throw IllPosedSystem("noise covariance is not positive definite");
  return {llt.matrixL().solve(system.A), llt.matrixL().solve(system.b), false};
}

double condition_of(const Matrix& a) {
  const Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0) return std::numeric_limits<double>::infinity();
  const double smin = sv[sv.size() - 1];
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return sv[0] / smin;
}

}  // namespace

double whitened_condition(const EquationSystem& system) { return condition_of(whiten(system).A); }

TdoaPolyModel solve_mwls(const EquationSystem& system) {
  if (system.A.rows() < system.A.cols()) {
    throw IllPosedSystem("fewer equations than polynomial coefficients");
  }
  const Whitened w = whiten(system);
  TdoaPolyModel model;
  model.pair = system.pair;
  model.epoch = system.epoch;
  model.condition = condition_of(w.A);
  if (!(model.condition <= kIllPosedCondition)) {
    throw IllPosedSystem(
        "coefficient matrix is rank deficient (condition " + std::to_string(model.condition) +
        "); differencing receptions within the same frame leaves the constant and linear columns "
        "collinear, use successive-frame differencing");
  }
  const Eigen::HouseholderQR<Matrix> qr(w.A);
  const Eigen::Index order = w.A.cols();
  const auto r = qr.matrixQR().topLeftCorner(order, order).triangularView<Eigen::Upper>();
  const Vector qtb = (qr.householderQ().transpose() * w.b).head(order);
  model.gamma = r.solve(qtb);
  if (w.noiseless) {
    model.covariance = Matrix::Zero(order, order);
  } else {
    const Matrix r_inv = r.solve(Matrix::Identity(order, order));
    model.covariance = r_inv * r_inv.transpose();
  }
  return model;
}

TdoaEstimate eval_tdoa(const TdoaPolyModel& model, double target_local) {
  const Vector nu = power_vector(target_local - model.epoch, model.order());
  return {nu.dot(model.gamma), nu.dot(model.covariance * nu)};
}

TdoaPolyModel rebase(const TdoaPolyModel& model, double new_epoch) {
  const Matrix t = taylor_shift(model.order(), new_epoch - model.epoch);
  TdoaPolyModel out = model;
  out.epoch = new_epoch;
  out.gamma = t * model.gamma;
  out.covariance = t * model.covariance * t.transpose();
  return out;
}

std::vector<TdoaEstimate> estimate_pair(const CampaignLog& log, AnchorPair pair, int order,
                                        const std::vector<double>& query_times) {
  const TdoaPolyModel model = solve_mwls(build_stds_system(log, pair, order));
  std::vector<TdoaEstimate> out;
  out.reserve(query_times.size());
  for (double t : query_times) out.push_back(eval_tdoa(model, t));
  return out;
}

std::vector<AnchorPair> anchor_pairs(PairSet set, std::size_t anchor_count) {
  if (anchor_count < 2) throw InvalidArgument("need at least two anchors for a pair");
  std::vector<AnchorPair> pairs;
  switch (set) {
    case PairSet::Set1:
      pairs.push_back({0, 1});
      break;
    case PairSet::Set2:
      for (std::size_t j = 1; j < anchor_count; ++j) pairs.push_back({0, j});
      break;
    case PairSet::Set3:
      for (std::size_t i = 0; i < anchor_count; ++i)
        for (std::size_t j = i + 1; j < anchor_count; ++j) pairs.push_back({i, j});
      break;
  }
  return pairs;
}

std::vector<double> query_times(const CampaignLog& log, AnchorPair pair, QueryPolicy policy) {
  if (policy == QueryPolicy::FrameStarts) return log.frame_start_local_times();
  std::vector<double> out(log.frames());
  for (std::size_t m = 0; m < log.frames(); ++m) out[m] = log.reception(m, pair.j).rx_local;
  return out;
}

}  // namespace ptdoa
