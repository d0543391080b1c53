#include <doctest.h>

#include <Eigen/Geometry>

#include "ptdoa/analysis.hpp"
#include "ptdoa/localization.hpp"
#include "support.hpp"

using namespace ptdoa;
using ptdoa::test::vec2;

namespace {

/// Exact TDOAs (seconds) from every non-reference anchor to the reference.
TdoaFixInput exact_input(const std::vector<Vector>& anchors, const Vector& target, std::size_t reference = 0,
                         double variance = 0.0) {
  TdoaFixInput in;
  in.reference = reference;
  const auto n = static_cast<Eigen::Index>(anchors.size() - 1);
  in.tdoas.resize(n);
  Eigen::Index r = 0;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (a == reference) continue;
    in.tdoas[r++] = ((target - anchors[a]).norm() - (target - anchors[reference]).norm()) / kSpeedOfLight;
  }
  in.q = variance > 0.0 ? localization_q(anchors.size(), variance) : Matrix::Zero(n, n);
  in.anchors.positions = anchors;
  return in;
}

}  // namespace

TEST_CASE("symmetric four-anchor layout") {
  const std::vector<Vector> anchors{vec2(1000, 0), vec2(-1000, 0), vec2(0, 1000), vec2(0, -1000)};
  const PositionFix fix = multilaterate(exact_input(anchors, vec2(120, -45)), 2);
  CHECK((fix.position - vec2(120, -45)).norm() < 1e-6);
  // At the centre every TDOA vanishes and the range column of the linear stage is empty.
  CHECK_THROWS_AS((void)multilaterate(exact_input(anchors, vec2(0, 0)), 2), DegenerateGeometry);
}

TEST_CASE("exact inputs recover random targets") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-300, 300);
  int checked = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto anchors = test::square_anchors(4 + static_cast<std::size_t>(k % 7), 2000.0, rng);
    const Vector target = vec2(u(rng), u(rng));
    TdoaFixInput in = exact_input(anchors, target, 0, 1e-24);
    try {
      const PositionFix fix = multilaterate(in, 2);
      CHECK((fix.position - target).norm() < 1e-4);
      ++checked;
    } catch (const DegenerateGeometry&) {
    }
  }
  CHECK(checked > 990);
}

TEST_CASE("fix follows translations and rotations of the layout") {
  std::mt19937_64 rng(10);
  const auto anchors = test::square_anchors(8, 2000.0, rng);
  const Vector target = vec2(37, -81);
  // Perturb the TDOAs so the test exercises more than the exact solution.
  TdoaFixInput base = exact_input(anchors, target, 0, 1e-20);
  std::normal_distribution<double> g(0.0, 1e-10);
  for (Eigen::Index k = 0; k < base.tdoas.size(); ++k) base.tdoas[k] += g(rng);
  const PositionFix ref = multilaterate(base, 2);

  const Vector shift = vec2(12345.6, -789.0);
  TdoaFixInput moved = base;
  for (auto& p : moved.anchors.positions) p += shift;
  CHECK((multilaterate(moved, 2).position - (ref.position + shift)).norm() < 1e-9);

  const Eigen::Matrix2d rot = Eigen::Rotation2Dd(0.7).toRotationMatrix();
  TdoaFixInput turned = base;
  for (auto& p : turned.anchors.positions) p = rot * p;
  const PositionFix rfix = multilaterate(turned, 2);
  CHECK((rfix.position - rot * ref.position).norm() < 1e-8);
  CHECK((rfix.covariance - rot * ref.covariance * rot.transpose()).norm() < 1e-8 * ref.covariance.norm());
}

TEST_CASE("reported covariance is symmetric and positive") {
  std::mt19937_64 rng(11);
  const auto anchors = test::square_anchors(10, 2000.0, rng);
  TdoaFixInput in = exact_input(anchors, vec2(5, 5), 0, 2e-20);
  in.anchors.covariances.assign(10, 0.01 * Matrix::Identity(2, 2));
  const PositionFix fix = multilaterate(in, 2);
  CHECK(fix.covariance.isApprox(fix.covariance.transpose()));
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(fix.covariance).eigenvalues().minCoeff() > 0.0);
  CHECK(fix.g_tdoa.rows() == 2);
  CHECK(fix.g_tdoa.cols() == 9);
  CHECK(fix.g_anchor.cols() == 20);
  CHECK_FALSE(fix.stage2_fallback);
}

TEST_CASE("geometry and input errors") {
  const std::vector<Vector> line{vec2(-1000, 0), vec2(-200, 0), vec2(500, 0), vec2(1000, 0)};
  CHECK_THROWS_AS((void)multilaterate(exact_input(line, vec2(100, 50)), 2), DegenerateGeometry);
  const std::vector<Vector> three{vec2(-1000, 0), vec2(0, 1000), vec2(1000, 0)};
  CHECK_THROWS_AS((void)multilaterate(exact_input(three, vec2(100, 50)), 2), InvalidArgument);
}

TEST_CASE("assembling pair models into a fix input") {
  TdoaPolyModel a, b;
  a.pair = {1, 0};
  b.pair = {2, 0};
  a.gamma = b.gamma = Vector::Zero(1);
  a.covariance = b.covariance = Matrix::Constant(1, 1, 4e-20);
  const std::vector<TdoaPolyModel> models{a, b};

  const TdoaFixInput structured = assemble_fix_input(models, 0, 0.0, CovarianceMode::Structured, {});
  CHECK(structured.q(0, 1) == doctest::Approx(2e-20).epsilon(1e-12));
  CHECK(structured.q(1, 0) == structured.q(0, 1));
  const TdoaFixInput diagonal = assemble_fix_input(models, 0, 0.0, CovarianceMode::Diagonal, {});
  CHECK(diagonal.q(0, 1) == 0.0);
  CHECK(diagonal.q(0, 0) == doctest::Approx(4e-20).epsilon(1e-12));

  TdoaPolyModel wrong = b;
  wrong.pair = {2, 1};
  const std::vector<TdoaPolyModel> mixed{a, wrong};
  CHECK_THROWS_AS((void)assemble_fix_input(mixed, 0, 0.0, CovarianceMode::Diagonal, {}), InvalidArgument);
}

TEST_CASE("end-to-end localization of a static target without noise") {
  std::mt19937_64 rng(12);
  const auto anchors = test::square_anchors(6, 2000.0, rng);
  Scenario sc = test::fixed_scenario(anchors, StaticMotion{}, vec2(-150, 220));
  sc.anchors[3].clock = {1.0 + 1.5e-5, 4e-4};
  sc.target_clock = {1.0 - 9e-6, -6e-4};
  const CampaignLog log = simulate_campaign(sc, rng);
  for (const auto& fix : localize_frames(log, 1)) CHECK((fix.position - vec2(-150, 220)).norm() < 1e-4);
  const PositionFix single = localize_target(log, 2, log.frame_start_local_times()[2]);
  CHECK((single.position - vec2(-150, 220)).norm() < 1e-4);
}

TEST_CASE("four anchors are enough under default noise") {
  ScenarioConfig config;
  config.anchor_count = 4;
  config.timing.frames = 3;
  int produced = 0;
  const int trials = 200;
  for (int k = 0; k < trials; ++k) {
    std::mt19937_64 rng(500 + static_cast<std::uint64_t>(k));
    const CampaignLog log = simulate_campaign(sample_scenario(config, rng), rng);
    try {
      const PositionFix fix = localize_target(log, 2, log.frame_start_local_times()[1]);
      if ((fix.position - log.frame_start_positions[1]).norm() < 100.0) ++produced;
    } catch (const DegenerateGeometry&) {
    }
  }
  CHECK(produced >= trials * 99 / 100);
}
