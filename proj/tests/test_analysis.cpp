#include <doctest.h>

#include "ptdoa/analysis.hpp"
#include "ptdoa/estimator.hpp"
#include "support.hpp"

using namespace ptdoa;
using ptdoa::test::vec2;

namespace {

std::vector<double> uniform_times(std::size_t n, double step = 0.1, double start = 0.0) {
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = start + step * static_cast<double>(k);
  return t;
}

/// Nominal reception instants of anchor j, on the axis where the earlier anchor of the pair
/// is heard at m T_f.
std::vector<double> nominal_times(AnchorPair pair, const ProtocolTiming& timing) {
  std::vector<double> t(timing.frames);
  for (std::size_t m = 0; m < timing.frames; ++m) {
    t[m] = static_cast<double>(m) * timing.frame_length +
           (static_cast<double>(pair.j) - static_cast<double>(std::min(pair.i, pair.j))) * timing.slot_length;
  }
  return t;
}

}  // namespace

TEST_CASE("concurrent TDOA variance") {
  CHECK(sigma_n2(NoiseModel::none()) == 0.0);
  ScenarioConfig config;
  const double c2 = kSpeedOfLight * kSpeedOfLight;
  CHECK(sigma_n2(config.noise_model()) == doctest::Approx(2.0 * (1e-3 / c2 + 1e-22)).epsilon(1e-12));
}

TEST_CASE("CRLB without and with the polynomial model") {
  CHECK(crlb1(4, 2.5).isApprox(2.5 * Matrix::Identity(4, 4)));
  CHECK(crlb1(1, 3.0)(0, 0) == 3.0);

  const auto full = crlb2(uniform_times(4), 4, 2.0);
  CHECK((full.tdoa - 2.0 * Matrix::Identity(4, 4)).norm() < 1e-9);

  const auto mean_only = crlb2(uniform_times(9), 1, 1.0);
  for (Eigen::Index k = 0; k < 9; ++k) CHECK(mean_only.tdoa(k, k) == doctest::Approx(1.0 / 9.0).epsilon(1e-12));

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t nf = 3 + static_cast<std::size_t>(u(rng) * 6);
    const int order = 1 + static_cast<int>(u(rng) * static_cast<double>(nf));
    std::vector<double> t(nf);
    for (std::size_t k = 0; k < nf; ++k) t[k] = 0.1 * static_cast<double>(k) + 0.01 * u(rng);
    const auto b = crlb2(t, std::min<int>(order, static_cast<int>(nf)), 1.0);
    CHECK(b.tdoa.trace() == doctest::Approx(std::min<double>(order, static_cast<double>(nf))).epsilon(1e-9));
    CHECK(b.tdoa.diagonal().maxCoeff() <= 1.0 + 1e-12);
  }

  std::vector<double> repeated{0.0, 0.1, 0.1};
  CHECK_THROWS_AS((void)crlb2(repeated, 3, 1.0), InvalidArgument);
  CHECK_THROWS_AS((void)crlb2(uniform_times(2), 3, 1.0), InvalidArgument);
}

TEST_CASE("theoretical MWLS covariance for the constant model reaches the bound at even frame counts") {
  ProtocolTiming timing;
  NoiseModel noise;
  noise.sigma_r = 1e-10;
  for (std::size_t nf : {4, 6, 8}) {
    timing.frames = nf;
    const AnchorPair pair{0, 3};
    const auto t = nominal_times(pair, timing);
    const auto th = theoretical_mwls_covariance(pair, timing, t, 1, noise);
    CHECK(th.F2.cwiseAbs().maxCoeff() <= 1e-12 * th.F1.cwiseAbs().maxCoeff());
    const double bound = sigma_n2(noise) / static_cast<double>(nf);
    for (Eigen::Index k = 0; k < th.tdoa_covariance.rows(); ++k) {
      CHECK(test::relative(th.small_slot_tdoa_covariance(k, k), bound) < 1e-6);
      // The exact form only approaches it as |i - j| T_s / T_f shrinks.
      CHECK(th.tdoa_covariance(k, k) >= bound * (1 - 1e-12));
      CHECK(test::relative(th.tdoa_covariance(k, k), bound) < 0.05);
    }
  }
  timing.frames = 5;
  const auto odd = theoretical_mwls_covariance({0, 3}, timing, nominal_times({0, 3}, timing), 1, noise);
  CHECK(odd.tdoa_covariance(0, 0) > sigma_n2(noise) / 5.0);
}

TEST_CASE("theoretical covariance never beats CRLB2") {
  ProtocolTiming timing;
  NoiseModel noise;
  noise.sigma_r = 1e-10;
  noise.sigma_phi = 1e-11;
  for (std::size_t nf : {3, 4, 5, 7, 9}) {
    timing.frames = nf;
    for (int order : {1, 2}) {
      if (nf < static_cast<std::size_t>(order) + 1) continue;
      const AnchorPair pair{2, 7};
      const auto t = nominal_times(pair, timing);
      const auto th = theoretical_mwls_covariance(pair, timing, t, order, noise);
      const Vector bound = framed_tdoa_variances(t, order, sigma_n2(noise));
      for (Eigen::Index k = 0; k < bound.size(); ++k) {
        CHECK(th.tdoa_covariance(k, k) >= bound[k] * (1.0 - 1e-9));
        CHECK(bound[k] <= sigma_n2(noise) * (1.0 + 1e-12));
      }
    }
  }
}

TEST_CASE("small slot limit of the D decomposition") {
  ProtocolTiming timing;
  timing.slot_length = 1e-9;
  timing.slots = 100000000;
  timing.frame_length = 0.1;
  timing.frames = 6;
  const auto th = theoretical_mwls_covariance({0, 5}, timing, std::vector<double>{0.0}, 1, NoiseModel{0, 1e-10, 0, 0});
  CHECK(test::relative(th.r1, 0.1) < 1e-6);
  CHECK(test::relative(th.r2, 0.1) < 1e-6);
  const Matrix expected = Matrix::Identity(6, 6) + th.delta_D;
  CHECK((th.D - expected).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("exact equation noise matches the tridiagonal structure for a static target") {
  for (double ts : {5e-3, 2e-3, 1e-3, 1e-4}) {
    ProtocolTiming timing;
    timing.slot_length = ts;
    timing.slots = 20;
    timing.frame_length = 0.1;
    timing.frames = 5;
    // Exact structure from a noise-free static campaign with reception noise only.
    Scenario sc = test::fixed_scenario({vec2(-700, 100), vec2(300, 800), vec2(900, -400), vec2(-100, -900),
                                        vec2(500, 500), vec2(-600, -300), vec2(0, 950), vec2(800, 0),
                                        vec2(-900, 700), vec2(200, -200)},
                                       StaticMotion{}, vec2(40, 10), timing);
    sc.noise.sigma_r = 1e-10;
    std::mt19937_64 rng(0);
    // Validation insists on T_f = N_s T_s; the log itself does not depend on it.
    sc.timing.slots = static_cast<std::size_t>(std::llround(0.1 / ts));
    const CampaignLog log = simulate_campaign(sc, rng);
    const AnchorPair pair{0, 9};
    const EquationSystem sys = build_stds_system(log, pair, 1);
    NoiseModel noise;
    noise.sigma_r = 1e-10;
    const auto th = theoretical_mwls_covariance(pair, sc.timing, std::vector<double>{0.0}, 1, noise);
    CHECK((sys.sigma_eta - th.sigma_eta).norm() <= 1e-12 * sys.sigma_eta.norm());
    // Entry-wise oracle: r1 and r2 carry the slot gap between the pair.
    const double r1 = 0.1 - 9 * ts, r2 = 0.1 + 9 * ts, sn2 = 2e-20;
    CHECK(test::relative(sys.sigma_eta(1, 1), sn2 * (r1 * r1 + r2 * r2)) < 1e-9);
    CHECK(test::relative(sys.sigma_eta(1, 2), sn2 * r1 * r2) < 1e-9);
  }
}

TEST_CASE("F2 relative to F1 shrinks with more frames of the same parity") {
  ProtocolTiming timing;
  NoiseModel noise;
  noise.sigma_r = 1e-10;
  double previous[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (std::size_t nf = 3; nf <= 9; ++nf) {
    timing.frames = nf;
    const auto th = theoretical_mwls_covariance({0, 4}, timing, std::vector<double>{0.0}, 2, noise);
    const double ratio = th.F2.norm() / th.F1.norm();
    CHECK(ratio < previous[nf % 2]);
    previous[nf % 2] = ratio;
    // Even counts nearly cancel the alternating correction.
    if (nf % 2 == 0) CHECK(ratio < 0.01);
  }
}

TEST_CASE("localization TDOA covariance") {
  const Matrix q = localization_q(3, 2.0);
  Matrix expected(2, 2);
  expected << 2.0, 1.0, 1.0, 2.0;
  CHECK(q.isApprox(expected));
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(localization_q(10, 1.0));
  CHECK(eig.eigenvalues().minCoeff() > 0.0);

  // With L = N_f the framed variances equal the concurrent variance.
  const Vector lambda = framed_tdoa_variances(uniform_times(3), 3, 4.0);
  for (Eigen::Index k = 0; k < 3; ++k) CHECK(lambda[k] == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("localization CRLB") {
  const std::vector<Vector> square{vec2(1000, 1000), vec2(-1000, 1000), vec2(-1000, -1000), vec2(1000, -1000)};
  const Matrix q = localization_q(4, 1e-20);
  const Matrix c = localization_crlb(square, 0, vec2(0, 0), q);
  CHECK(c(0, 0) == doctest::Approx(c(1, 1)).epsilon(1e-9));
  CHECK(std::abs(c(0, 1)) < 1e-9 * c(0, 0));
  CHECK(localization_crlb(square, 0, vec2(0, 0), 4.0 * q).isApprox(4.0 * c, 1e-9));

  // Anchor uncertainty can only loosen the bound.
  const Matrix blocks = stacked_anchor_covariance(std::vector<Matrix>(4, 0.01 * Matrix::Identity(2, 2)));
  const Matrix loose = localization_crlb(square, 0, vec2(0, 0), q, blocks);
  CHECK(loose.trace() > c.trace());

  const std::vector<Vector> line{vec2(-1000, 0), vec2(0, 0), vec2(500, 0), vec2(1000, 0)};
  CHECK_THROWS_AS((void)localization_crlb(line, 0, vec2(200, 0), q), DegenerateGeometry);
}

TEST_CASE("position covariance sandwich") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  Matrix g1(2, 3), g2(2, 8), a(3, 3), b(8, 8);
  for (Eigen::Index k = 0; k < g1.size(); ++k) g1.data()[k] = g(rng);
  for (Eigen::Index k = 0; k < g2.size(); ++k) g2.data()[k] = g(rng);
  for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = g(rng);
  for (Eigen::Index k = 0; k < b.size(); ++k) b.data()[k] = g(rng);
  const Matrix q = a * a.transpose(), pa = b * b.transpose();
  CHECK(position_covariance_prediction(g1, g2, q, Matrix::Zero(8, 8)).isApprox(g1 * q * g1.transpose()));
  const Matrix full = position_covariance_prediction(g1, g2, q, pa);
  CHECK(full.isApprox(full.transpose()));
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(full).eigenvalues().minCoeff() >= 0.0);
}
