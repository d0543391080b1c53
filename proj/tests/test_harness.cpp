#include <doctest.h>

#include <sstream>

#include "ptdoa/harness.hpp"
#include "support.hpp"

using namespace ptdoa;

namespace {

/// Direct transcription of the TDOA RMSE: nested loops, no vector algebra.
double rmse_tdoa_oracle(const std::vector<std::vector<std::vector<double>>>& e) {
  double outer = 0.0;
  for (const auto& trial : e) {
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& pair : trial) {
      for (double x : pair) acc += x * x;
      count += pair.size();
    }
    outer += std::sqrt(acc / static_cast<double>(count));
  }
  return outer / static_cast<double>(e.size());
}

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.name = "unit";
  spec.task = Task::Tdoa;
  spec.sweep = SweepVariable::Frames;
  spec.sweep_values = {Json(3), Json(4)};
  spec.orders = {1, 2};
  spec.pair_set = PairSet::Set2;
  spec.trials = 12;
  spec.seed = 5;
  return spec;
}

std::string csv_of(const ExperimentResult& r) {
  std::ostringstream out;
  write_results_csv(out, r.rows);
  write_trials_csv(out, r);
  return out.str();
}

}  // namespace

TEST_CASE("TDOA RMSE nests the root inside the trial average") {
  CHECK(rmse_tdoa({{Vector::Zero(3)}}) == 0.0);
  const double e = 2.5e-10;
  CHECK(rmse_tdoa({{Vector::Constant(1, e)}, {Vector::Constant(1, -e)}}) == doctest::Approx(e));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> size(1, 6);
  for (int k = 0; k < 100; ++k) {
    const int trials = size(rng), pairs = size(rng), frames = size(rng);
    std::vector<std::vector<Vector>> tensor(trials);
    std::vector<std::vector<std::vector<double>>> raw(trials);
    for (int t = 0; t < trials; ++t) {
      for (int p = 0; p < pairs; ++p) {
        Vector v(frames);
        std::vector<double> r(frames);
        for (int f = 0; f < frames; ++f) r[f] = v[f] = g(rng);
        tensor[t].push_back(v);
        raw[t].push_back(r);
      }
    }
    CHECK(rmse_tdoa(tensor) == doctest::Approx(rmse_tdoa_oracle(raw)).epsilon(1e-12));
  }
}

TEST_CASE("position RMSE is a mean of error norms") {
  std::vector<Vector> truth{test::vec2(1, 2), test::vec2(-3, 4)};
  CHECK(rmse_position(truth, truth) == 0.0);
  const std::vector<Vector> a{Vector::Constant(1, 3.0), Vector::Constant(1, -4.0)};
  const std::vector<Vector> z{Vector::Zero(1), Vector::Zero(1)};
  CHECK(rmse_position(a, z) == 3.5);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int k = 0; k < 100; ++k) {
    std::vector<Vector> est, tru;
    double oracle = 0.0;
    for (int n = 0; n < 7; ++n) {
      est.push_back(test::vec2(g(rng), g(rng)));
      tru.push_back(test::vec2(g(rng), g(rng)));
      const double dx = est.back()[0] - tru.back()[0], dy = est.back()[1] - tru.back()[1];
      oracle += std::sqrt(dx * dx + dy * dy) / 7.0;
    }
    CHECK(rmse_position(est, tru) == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("trial streams are deterministic and distinct") {
  auto a = trial_rng(1, 0), b = trial_rng(1, 0), c = trial_rng(1, 1), d = trial_rng(2, 0);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
}

TEST_CASE("experiments are reproducible and independent of thread count") {
  const ExperimentSpec spec = small_spec();
  const ExperimentResult one = run_experiment(spec, 1);
  const ExperimentResult again = run_experiment(spec, 1);
  const ExperimentResult many = run_experiment(spec, 4);
  CHECK(csv_of(one) == csv_of(again));
  CHECK(csv_of(one) == csv_of(many));
  REQUIRE(one.rows.size() == 4);
  for (const auto& row : one.rows) {
    CHECK(row.rmse >= std::abs(row.bias));
    CHECK(row.crlb2 <= row.crlb1);
    CHECK(row.excluded == 0);
  }
}

TEST_CASE("per-trial failures are recorded without aborting the sweep") {
  ExperimentSpec spec = small_spec();
  spec.orders = {3};  // three frames cannot support three coefficients
  const ExperimentResult r = run_experiment(spec, 1);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].excluded == spec.trials);
  CHECK(r.rows[0].exclusion_rate == 1.0);
  CHECK(r.rows[1].excluded == 0);
  CHECK(r.trials.front().status == "failed");
}

TEST_CASE("experiment spec JSON and presets") {
  const ExperimentSpec spec = small_spec();
  const ExperimentSpec back = experiment_spec_from_json(to_json(spec));
  CHECK(to_json(back) == to_json(spec));
  CHECK_THROWS_AS((void)experiment_spec_from_json(Json::parse(R"({"name": "x", "trails": 3})")), InvalidArgument);
  CHECK_THROWS_AS((void)experiment_spec_from_json(Json::parse(R"({"name": "x", "trials": 0})")), InvalidArgument);
  CHECK_THROWS_AS(
      (void)experiment_spec_from_json(Json::parse(R"({"name": "x", "sweep": {"variable": "frames", "values": []}})")),
      InvalidArgument);

  const auto names = preset_names();
  for (const char* required : {"static-fig3", "pairs-fig4", "allpairs-fig5", "motion-fig6", "noise-fig7",
                               "locnoise-fig8", "anchors-fig9", "cdf-fig10", "dynamics-fig11"}) {
    CHECK(std::find(names.begin(), names.end(), required) != names.end());
  }
  for (const auto& name : names) {
    const ExperimentSpec p = load_experiment(name);
    CHECK(p.name == name);
  }
}

TEST_CASE("localization experiments report fixes and bounds") {
  ExperimentSpec spec;
  spec.name = "loc";
  spec.task = Task::Localization;
  spec.scenario_overrides = Json::parse(R"({"timing": {"frames": 3}, "sigma_p": 0.1})");
  spec.trials = 20;
  const ExperimentResult r = run_experiment(spec, 2);
  REQUIRE(r.rows.size() == 1);
  const auto& row = r.rows[0];
  CHECK(row.samples + row.excluded == 60);
  CHECK(row.rmse > 0.0);
  CHECK(row.rms >= row.rmse);
  CHECK(row.crlb2 <= row.crlb1 * (1 + 1e-12));
  CHECK(std::isfinite(row.nees));

  const ExperimentResult bounds = run_experiment(spec, 1, true);
  CHECK(std::isnan(bounds.rows[0].rmse));
  CHECK(bounds.rows[0].crlb2 == row.crlb2);
}

TEST_CASE("gates") {
  ExperimentResult r;
  r.spec = small_spec();
  auto row = [](const std::string& v, int order, double rmse) {
    ResultRow x;
    x.sweep_variable = "frames";
    x.sweep_value = v;
    x.order = order;
    x.rmse = rmse;
    x.crlb1 = 2.0;
    x.crlb2 = 1.0;
    return x;
  };
  r.rows = {row("4", 2, 1.05), row("4", 3, 1.2), row("5", 2, 1.0), row("5", 3, 0.9)};

  r.spec.gate.kind = "order-tradeoff";
  r.spec.gate.better = 2;
  r.spec.gate.worse = 3;
  CHECK_FALSE(evaluate_gate(r).passed);
  r.spec.gate.max_sweep = 4;
  CHECK(evaluate_gate(r).passed);

  r.spec.gate = {};
  r.spec.gate.kind = "tdoa-efficiency";
  r.spec.gate.tolerance = 0.1;
  r.spec.orders = {2};
  CHECK(evaluate_gate(r).passed == false);  // 1.2 is 20% above the bound
  r.rows[1].rmse = 1.08;
  CHECK(evaluate_gate(r).passed);

  r.spec.gate = {};
  r.spec.gate.kind = "monotone";
  r.spec.orders = {3};
  r.rows[3].rmse = 1.5;
  CHECK_FALSE(evaluate_gate(r).passed);
  r.spec.gate.inversions = 1;
  CHECK(evaluate_gate(r).passed);

  r.spec.gate = {};
  r.spec.gate.kind = "flat";
  r.spec.gate.factor = 1.2;
  r.spec.orders = {2};
  CHECK(evaluate_gate(r).passed);
}
