#ifndef PTDOA_HARNESS_HPP
#define PTDOA_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ptdoa/io.hpp"
#include "ptdoa/localization.hpp"

namespace ptdoa {

// ---- metrics -------------------------------------------------------------

/// errors[trial][pair] holds that pair's per-frame TDOA errors. Mean over trials of the
/// root of the pair-averaged squared error norm.
double rmse_tdoa(const std::vector<std::vector<Vector>>& errors);

/// Mean Euclidean error norm over all fixes.
double rmse_position(std::span<const Vector> fixes, std::span<const Vector> truths);

// ---- experiment specification --------------------------------------------

enum class Task { Tdoa, Localization };

enum class SweepVariable { None, Frames, Order, SigmaR, SigmaPhi, Anchors, AccelMax, PairSet, Motion };

[[nodiscard]] const char* sweep_variable_name(SweepVariable v);
SweepVariable parse_sweep_variable(const std::string& name);

/// Pass/fail rule evaluated on an experiment's result table.
struct Gate {
  std::string kind = "none";  // tdoa-efficiency | order-tradeoff | monotone | flat | bound-ratio
  double tolerance = 0.1;
  int better = 0;  // order-tradeoff: order expected to win
  int worse = 0;
  double min_sweep = -std::numeric_limits<double>::infinity();
  double max_sweep = std::numeric_limits<double>::infinity();
  double factor = 2.0;       // flat: max/min rmse
  int inversions = 0;        // monotone: tolerated increases
  double max_exclusion = 0.02;
};

struct ExperimentSpec {
  std::string name;
  Task task = Task::Tdoa;
  Json scenario_overrides = Json::object();
  SweepVariable sweep = SweepVariable::None;
  std::vector<Json> sweep_values{Json(nullptr)};
  std::vector<int> orders{2};
  PairSet pair_set = PairSet::Set3;
  QueryPolicy query = QueryPolicy::ReceptionsOfSecond;
  CovarianceMode covariance_mode = CovarianceMode::Diagonal;
  std::size_t reference = 0;
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  double outlier_threshold_m = 100.0;
  bool per_pair = false;  // TDOA task: also emit one row per anchor pair
  bool acceptance = false;
  Gate gate;

  void validate() const;
};

[[nodiscard]] Json to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_spec_from_json(const Json& json);

/// Directory holding the shipped preset specs (PTDOA_PRESETS overrides the built-in path).
[[nodiscard]] std::filesystem::path preset_directory();
[[nodiscard]] std::vector<std::string> preset_names();
/// Loads a preset by name, or a spec file when `name_or_path` names an existing file.
ExperimentSpec load_experiment(const std::string& name_or_path);

// ---- results ---------------------------------------------------------------

struct ResultRow {
  std::string experiment;
  std::string sweep_variable;
  std::string sweep_value;
  int order = 0;
  std::size_t trials = 0;
  std::size_t samples = 0;  // trials (TDOA) or fixes (localization)
  std::size_t excluded = 0;
  double exclusion_rate = 0.0;
  double rmse = 0.0;      // TDOA: s, mean of per-trial RMS; position: m, mean error norm
  double rms = 0.0;       // root of the pooled mean squared error
  double bias = 0.0;      // TDOA: mean error; position: norm of the mean error vector
  double variance = 0.0;  // TDOA: pooled error variance; position: trace of error covariance
  double nees = std::numeric_limits<double>::quiet_NaN();
  double crlb1 = 0.0;     // root of the mean bound variance (trace for positions)
  double crlb2 = 0.0;
  double theory = 0.0;
  double runtime_s = 0.0;  // reported in the metadata sidecar only
};

struct TrialRecord {
  std::string sweep_value;
  int order = 0;
  std::size_t trial = 0;
  std::string status;  // ok | excluded | failed
  double metric = 0.0; // per-trial TDOA RMS (s) or mean fix error (m)
  double mse = 0.0;    // per-trial mean squared error
  std::string note;
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<ResultRow> rows;
  std::vector<TrialRecord> trials;
};

struct GateResult {
  bool passed = true;
  std::vector<std::string> messages;
};

/// Independent generator for one trial, split from the master seed by counter.
std::mt19937_64 trial_rng(std::uint64_t master_seed, std::uint64_t trial);

/// Runs every sweep value and order. Trials are shared across orders (paired comparison)
/// and reduced in trial order, so output does not depend on `threads`.
ExperimentResult run_experiment(const ExperimentSpec& spec, unsigned threads = 1, bool bounds_only = false);

GateResult evaluate_gate(const ExperimentResult& result);

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_trials_csv(std::ostream& out, const ExperimentResult& result);
[[nodiscard]] Json metadata_json(const ExperimentResult& result, unsigned threads);

/// Writes <name>.csv, <name>_trials.csv and <name>.json into `dir`.
void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result, unsigned threads);

[[nodiscard]] const char* build_version();

}  // namespace ptdoa

#endif  // PTDOA_HARNESS_HPP
