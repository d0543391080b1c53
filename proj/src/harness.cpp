#include "ptdoa/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <thread>

#include "ptdoa/analysis.hpp"

#ifndef PTDOA_VERSION
#define PTDOA_VERSION "unknown"
#endif
#ifndef PTDOA_PRESET_DIR
#define PTDOA_PRESET_DIR "presets"
#endif

namespace ptdoa {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string value_label(const Json& v) {
  if (v.is_null()) return "-";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return format_double(v.get<double>());
  return v.dump();
}

const char* pair_set_name(PairSet s) {
  switch (s) {
    case PairSet::Set1: return "set1";
    case PairSet::Set2: return "set2";
    case PairSet::Set3: return "set3";
  }
  return "set3";
}

PairSet parse_pair_set(const Json& v) {
  const std::string name = v.is_number() ? "set" + std::to_string(v.get<int>()) : v.get<std::string>();
  for (auto s : {PairSet::Set1, PairSet::Set2, PairSet::Set3})
    if (name == pair_set_name(s)) return s;
  throw InvalidArgument("unknown pair set: " + name);
}

struct Setting {
  ScenarioConfig config;
  std::vector<int> orders;
  PairSet pair_set;
};

Setting setting_for(const ExperimentSpec& spec, const Json& value) {
  Setting s;
  apply_overrides(s.config, spec.scenario_overrides);
  s.orders = spec.orders;
  s.pair_set = spec.pair_set;
  switch (spec.sweep) {
    case SweepVariable::None: break;
    case SweepVariable::Frames: s.config.timing.frames = value.get<std::size_t>(); break;
    case SweepVariable::Order: s.orders = {value.get<int>()}; break;
    case SweepVariable::SigmaR: s.config.sigma_r_m = value.get<double>(); break;
    case SweepVariable::SigmaPhi: s.config.sigma_phi = value.get<double>(); break;
    case SweepVariable::Anchors: s.config.anchor_count = value.get<std::size_t>(); break;
    case SweepVariable::AccelMax: s.config.a_max = value.get<double>(); break;
    case SweepVariable::PairSet: s.pair_set = parse_pair_set(value); break;
    case SweepVariable::Motion: s.config.motion = parse_motion_kind(value.get<std::string>()); break;
  }
  s.config.validate();
  return s;
}

/// What one trial produced for one model order.
struct OrderOutcome {
  bool failed = false;
  std::string note;
  // TDOA task
  std::vector<double> errors;
  std::vector<std::size_t> pair_offsets;  // start of each pair's frames in `errors`
  double crlb2 = 0.0;                     // mean CRLB2 diagonal over pairs and frames
  // localization task
  std::vector<Vector> fix_errors;
  std::vector<double> nees;
  std::vector<char> fix_excluded;
  std::vector<double> crlb1_trace, crlb2_trace, reported_trace;
};

OrderOutcome run_tdoa_order(const CampaignLog& log, const std::vector<AnchorPair>& pairs, int order,
                            QueryPolicy policy, bool bounds_only) {
  OrderOutcome out;
  const double sn2 = sigma_n2(log.scenario.noise);
  double bound_sum = 0.0;
  std::size_t bound_count = 0;
  try {
    for (const auto& pair : pairs) {
      const auto times = query_times(log, pair, policy);
      const Vector lambda = framed_tdoa_variances(times, order, sn2);
      bound_sum += lambda.sum();
      bound_count += static_cast<std::size_t>(lambda.size());
      if (bounds_only) continue;
      const auto est = estimate_pair(log, pair, order, times);
      out.pair_offsets.push_back(out.errors.size());
      for (std::size_t k = 0; k < times.size(); ++k) {
        out.errors.push_back(est[k].tdoa - log.true_tdoa_at_local(pair, times[k]));
      }
    }
  } catch (const Error& e) {
    out.failed = true;
    out.note = e.what();
  }
  out.crlb2 = bound_count > 0 ? bound_sum / static_cast<double>(bound_count) : kNaN;
  return out;
}

OrderOutcome run_localization_order(const CampaignLog& log, int order, const ExperimentSpec& spec,
                                    bool bounds_only) {
  OrderOutcome out;
  const auto& sc = log.scenario;
  const double sn2 = sigma_n2(sc.noise);
  const std::size_t n_frames = log.frames();
  std::vector<Vector> true_anchors;
  std::vector<Matrix> covs;
  for (const auto& a : sc.anchors) {
    true_anchors.push_back(a.true_position);
    covs.push_back(a.position_covariance);
  }
  const Matrix anchor_cov = stacked_anchor_covariance(covs);
  const auto starts = log.frame_start_local_times();

  Vector lambda;
  try {
    lambda = framed_tdoa_variances(starts, order, sn2);
  } catch (const Error&) {
    lambda = Vector::Constant(static_cast<Eigen::Index>(n_frames), kNaN);
  }
  for (std::size_t m = 0; m < n_frames; ++m) {
    const Vector& truth = log.frame_start_positions[m];
    double c1 = kNaN, c2 = kNaN;
    try {
      c1 = localization_crlb(true_anchors, spec.reference, truth, localization_q(sc.anchors.size(), sn2), anchor_cov)
               .trace();
      c2 = localization_crlb(true_anchors, spec.reference, truth,
                             localization_q(sc.anchors.size(), lambda[static_cast<Eigen::Index>(m)]), anchor_cov)
               .trace();
    } catch (const Error&) {
    }
    out.crlb1_trace.push_back(c1);
    out.crlb2_trace.push_back(c2);
  }
  if (bounds_only) return out;

  std::vector<PositionFix> fixes;
  try {
    fixes = localize_frames(log, order, spec.covariance_mode, spec.reference);
  } catch (const Error& e) {
    out.failed = true;
    out.note = e.what();
    return out;
  }
  for (std::size_t m = 0; m < n_frames; ++m) {
    const Vector err = fixes[m].position - log.frame_start_positions[m];
    const double norm = err.norm();
    double nees = kNaN;
    const Eigen::LDLT<Matrix> ldlt(fixes[m].covariance);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) nees = err.dot(ldlt.solve(err));
    out.fix_errors.push_back(err);
    out.nees.push_back(nees);
    out.reported_trace.push_back(fixes[m].covariance.trace());
    out.fix_excluded.push_back(!(norm <= spec.outlier_threshold_m));
  }
  return out;
}

/// Runs `body(trial)` for every trial on `threads` workers; results land by index.
template <typename Result, typename Body>
std::vector<Result> parallel_trials(std::size_t trials, unsigned threads, Body body) {
  std::vector<Result> results(trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < trials; t = next++) results[t] = body(t);
  };
  const unsigned n = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(trials)));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return results;
}

double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double x : v)
    if (std::isfinite(x)) sum += x, ++n;
  return n > 0 ? sum / static_cast<double>(n) : kNaN;
}

/// Nominal-axis theoretical MWLS variance averaged over pairs and reception instants of j.
double theoretical_tdoa_variance(const std::vector<AnchorPair>& pairs, const ProtocolTiming& timing, int order,
                                 const NoiseModel& noise) {
  double sum = 0.0;
  std::size_t n = 0;
  try {
    for (const auto& pair : pairs) {
      std::vector<double> t(timing.frames);
      for (std::size_t m = 0; m < timing.frames; ++m) {
        t[m] = static_cast<double>(m) * timing.frame_length +
               static_cast<double>(pair.j) * timing.slot_length -
               static_cast<double>(std::min(pair.i, pair.j)) * timing.slot_length;
      }
      const auto th = theoretical_mwls_covariance(pair, timing, t, order, noise);
      sum += th.tdoa_covariance.diagonal().sum();
      n += timing.frames;
    }
  } catch (const Error&) {
    return kNaN;
  }
  return n > 0 ? sum / static_cast<double>(n) : kNaN;
}

ResultRow reduce_tdoa(const ExperimentSpec& spec, const std::string& label, int order,
                      const std::vector<OrderOutcome>& outcomes, std::vector<TrialRecord>& records) {
  ResultRow row;
  row.order = order;
  row.trials = outcomes.size();
  double rmse_sum = 0.0, sq_sum = 0.0, e_sum = 0.0;
  std::size_t n_err = 0;
  std::vector<double> bounds;
  for (std::size_t t = 0; t < outcomes.size(); ++t) {
    const auto& o = outcomes[t];
    bounds.push_back(o.crlb2);
    TrialRecord rec{label, order, t, "ok", kNaN, kNaN, o.note};
    if (o.failed) {
      rec.status = "failed";
      ++row.excluded;
    } else if (!o.errors.empty()) {
      double sq = 0.0;
      for (double e : o.errors) sq += e * e;
      const double mse = sq / static_cast<double>(o.errors.size());
      rec.metric = std::sqrt(mse);
      rec.mse = mse;
      if (!(rec.metric * kSpeedOfLight <= spec.outlier_threshold_m)) {
        rec.status = "excluded";
        ++row.excluded;
      } else {
        ++row.samples;
        rmse_sum += rec.metric;
        sq_sum += sq;
        for (double e : o.errors) e_sum += e;
        n_err += o.errors.size();
      }
    }
    records.push_back(std::move(rec));
  }
  row.exclusion_rate = row.trials > 0 ? static_cast<double>(row.excluded) / static_cast<double>(row.trials) : 0.0;
  if (row.samples > 0) {
    row.rmse = rmse_sum / static_cast<double>(row.samples);
    row.rms = std::sqrt(sq_sum / static_cast<double>(n_err));
    row.bias = e_sum / static_cast<double>(n_err);
    row.variance = sq_sum / static_cast<double>(n_err) - row.bias * row.bias;
  } else {
    row.rmse = row.rms = row.bias = row.variance = kNaN;
  }
  row.crlb2 = std::sqrt(mean_of(bounds));
  return row;
}

ResultRow reduce_localization(const std::string& label, int order, const std::vector<OrderOutcome>& outcomes,
                              std::vector<TrialRecord>& records, bool bounds_only) {
  ResultRow row;
  row.order = order;
  row.trials = outcomes.size();
  std::size_t total = 0;
  double norm_sum = 0.0, sq_sum = 0.0;
  Vector err_sum;
  Matrix outer;
  std::vector<double> nees, c1, c2, reported;
  for (std::size_t t = 0; t < outcomes.size(); ++t) {
    const auto& o = outcomes[t];
    c1.insert(c1.end(), o.crlb1_trace.begin(), o.crlb1_trace.end());
    c2.insert(c2.end(), o.crlb2_trace.begin(), o.crlb2_trace.end());
    if (bounds_only) continue;
    TrialRecord rec{label, order, t, "ok", kNaN, kNaN, o.note};
    if (o.failed) {
      rec.status = "failed";
      total += o.crlb1_trace.size();
      row.excluded += o.crlb1_trace.size();
      records.push_back(std::move(rec));
      continue;
    }
    double trial_norm = 0.0, trial_sq = 0.0;
    std::size_t trial_used = 0;
    for (std::size_t m = 0; m < o.fix_errors.size(); ++m) {
      ++total;
      if (o.fix_excluded[m]) {
        ++row.excluded;
        continue;
      }
      const Vector& e = o.fix_errors[m];
      if (err_sum.size() == 0) {
        err_sum = Vector::Zero(e.size());
        outer = Matrix::Zero(e.size(), e.size());
      }
      ++row.samples;
      ++trial_used;
      norm_sum += e.norm();
      sq_sum += e.squaredNorm();
      trial_norm += e.norm();
      trial_sq += e.squaredNorm();
      err_sum += e;
      outer += e * e.transpose();
      nees.push_back(o.nees[m]);
      reported.push_back(o.reported_trace[m]);
    }
    if (trial_used < o.fix_errors.size()) rec.status = "excluded";
    if (trial_used > 0) {
      rec.metric = trial_norm / static_cast<double>(trial_used);
      rec.mse = trial_sq / static_cast<double>(trial_used);
    }
    records.push_back(std::move(rec));
  }
  row.exclusion_rate = total > 0 ? static_cast<double>(row.excluded) / static_cast<double>(total) : 0.0;
  if (row.samples > 0) {
    const double n = static_cast<double>(row.samples);
    const Vector mean = err_sum / n;
    row.rmse = norm_sum / n;
    row.rms = std::sqrt(sq_sum / n);
    row.bias = mean.norm();
    row.variance = (outer / n - mean * mean.transpose()).trace();
    row.nees = mean_of(nees);
    row.theory = std::sqrt(mean_of(reported));
  } else {
    row.rmse = row.rms = row.bias = row.variance = row.theory = kNaN;
  }
  row.crlb1 = std::sqrt(mean_of(c1));
  row.crlb2 = std::sqrt(mean_of(c2));
  return row;
}

/// The aggregate statistics restricted to one pair at a time; rows are keyed "i-j".
std::vector<ResultRow> per_pair_rows(const ExperimentSpec& spec, const std::string& label, int order,
                                     const std::vector<AnchorPair>& pairs, const std::vector<OrderOutcome>& outcomes) {
  std::vector<ResultRow> rows;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    ResultRow row;
    row.experiment = spec.name;
    row.sweep_variable = "pair@" + std::string(sweep_variable_name(spec.sweep)) + "=" + label;
    row.sweep_value = std::to_string(pairs[p].i) + "-" + std::to_string(pairs[p].j);
    row.order = order;
    row.trials = outcomes.size();
    double rmse_sum = 0.0, sq_sum = 0.0, e_sum = 0.0;
    std::size_t n_err = 0;
    for (const auto& o : outcomes) {
      if (o.failed || o.pair_offsets.size() != pairs.size()) {
        ++row.excluded;
        continue;
      }
      const std::size_t begin = o.pair_offsets[p];
      const std::size_t end = p + 1 < pairs.size() ? o.pair_offsets[p + 1] : o.errors.size();
      double sq = 0.0, sum = 0.0;
      for (std::size_t k = begin; k < end; ++k) sq += o.errors[k] * o.errors[k], sum += o.errors[k];
      const double rms = std::sqrt(sq / static_cast<double>(end - begin));
      if (!(rms * kSpeedOfLight <= spec.outlier_threshold_m)) {
        ++row.excluded;
        continue;
      }
      ++row.samples;
      rmse_sum += rms;
      sq_sum += sq;
      e_sum += sum;
      n_err += end - begin;
    }
    row.exclusion_rate = static_cast<double>(row.excluded) / static_cast<double>(row.trials);
    if (row.samples > 0) {
      row.rmse = rmse_sum / static_cast<double>(row.samples);
      row.rms = std::sqrt(sq_sum / static_cast<double>(n_err));
      row.bias = e_sum / static_cast<double>(n_err);
      row.variance = sq_sum / static_cast<double>(n_err) - row.bias * row.bias;
    } else {
      row.rmse = row.rms = row.bias = row.variance = kNaN;
    }
    row.crlb2 = row.theory = kNaN;
    rows.push_back(row);
  }
  return rows;
}

bool is_pair_row(const ResultRow& row) { return row.sweep_variable.rfind("pair@", 0) == 0; }

std::vector<const ResultRow*> rows_for_order(const ExperimentResult& r, int order) {
  std::vector<const ResultRow*> out;
  for (const auto& row : r.rows)
    if (row.order == order && !is_pair_row(row)) out.push_back(&row);
  return out;
}

std::string describe(const ResultRow& row) { return row.sweep_variable + "=" + row.sweep_value + " L=" + std::to_string(row.order); }

double sweep_number(const ResultRow& row) {
  try {
    return parse_double(row.sweep_value);
  } catch (const Error&) {
    return kNaN;
  }
}

bool in_window(const Gate& g, const ResultRow& row) {
  const double v = sweep_number(row);
  return std::isnan(v) || (v >= g.min_sweep && v <= g.max_sweep);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

// ---- metrics -------------------------------------------------------------

double rmse_tdoa(const std::vector<std::vector<Vector>>& errors) {
  if (errors.empty()) throw InvalidArgument("no trials");
  double total = 0.0;
  for (const auto& trial : errors) {
    if (trial.empty()) throw InvalidArgument("trial without pairs");
    double sq = 0.0;
    Eigen::Index frames = trial.front().size();
    for (const auto& pair : trial) {
      if (pair.size() != frames) throw InvalidArgument("pairs must share the frame count");
      sq += pair.squaredNorm();
    }
    total += std::sqrt(sq / static_cast<double>(trial.size() * static_cast<std::size_t>(frames)));
  }
  return total / static_cast<double>(errors.size());
}

double rmse_position(std::span<const Vector> fixes, std::span<const Vector> truths) {
  if (fixes.size() != truths.size() || fixes.empty()) throw InvalidArgument("fixes and truths must pair up");
  double sum = 0.0;
  for (std::size_t k = 0; k < fixes.size(); ++k) sum += (fixes[k] - truths[k]).norm();
  return sum / static_cast<double>(fixes.size());
}

// ---- spec ----------------------------------------------------------------

const char* sweep_variable_name(SweepVariable v) {
  switch (v) {
    case SweepVariable::None: return "none";
    case SweepVariable::Frames: return "frames";
    case SweepVariable::Order: return "order";
    case SweepVariable::SigmaR: return "sigma_r";
    case SweepVariable::SigmaPhi: return "sigma_phi";
    case SweepVariable::Anchors: return "anchors";
    case SweepVariable::AccelMax: return "a_max";
    case SweepVariable::PairSet: return "pair_set";
    case SweepVariable::Motion: return "motion";
  }
  return "none";
}

SweepVariable parse_sweep_variable(const std::string& name) {
  for (auto v : {SweepVariable::None, SweepVariable::Frames, SweepVariable::Order, SweepVariable::SigmaR,
                 SweepVariable::SigmaPhi, SweepVariable::Anchors, SweepVariable::AccelMax, SweepVariable::PairSet,
                 SweepVariable::Motion}) {
    if (name == sweep_variable_name(v)) return v;
  }
  throw InvalidArgument("unknown sweep variable: " + name);
}

void ExperimentSpec::validate() const {
  if (name.empty()) throw InvalidArgument("experiment needs a name");
  if (trials < 1) throw InvalidArgument("trials must be at least 1");
  if (sweep_values.empty()) throw InvalidArgument("sweep values must be nonempty");
  if (orders.empty()) throw InvalidArgument("at least one model order is required");
  for (int l : orders)
    if (l < 1) throw InvalidArgument("model order must be at least 1");
  if (!(outlier_threshold_m > 0.0)) throw InvalidArgument("outlier threshold must be positive");
  for (const auto& v : sweep_values) (void)setting_for(*this, v);
}

Json to_json(const ExperimentSpec& s) {
  Json gate = {{"kind", s.gate.kind}, {"tolerance", s.gate.tolerance}, {"better", s.gate.better},
               {"worse", s.gate.worse}, {"factor", s.gate.factor}, {"inversions", s.gate.inversions},
               {"max_exclusion", s.gate.max_exclusion}};
  if (std::isfinite(s.gate.min_sweep)) gate["min_sweep"] = s.gate.min_sweep;
  if (std::isfinite(s.gate.max_sweep)) gate["max_sweep"] = s.gate.max_sweep;
  return {{"name", s.name},
          {"task", s.task == Task::Tdoa ? "tdoa" : "localization"},
          {"scenario", s.scenario_overrides},
          {"sweep", {{"variable", sweep_variable_name(s.sweep)}, {"values", s.sweep_values}}},
          {"orders", s.orders},
          {"pair_set", pair_set_name(s.pair_set)},
          {"query", s.query == QueryPolicy::FrameStarts ? "frame-starts" : "receptions"},
          {"covariance_mode", s.covariance_mode == CovarianceMode::Diagonal ? "diagonal" : "structured"},
          {"reference", s.reference},
          {"trials", s.trials},
          {"seed", s.seed},
          {"outlier_threshold_m", s.outlier_threshold_m},
          {"per_pair", s.per_pair},
          {"acceptance", s.acceptance},
          {"gate", gate}};
}

ExperimentSpec experiment_spec_from_json(const Json& j) {
  ExperimentSpec s;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "name") s.name = v.get<std::string>();
      else if (key == "task") {
        const auto t = v.get<std::string>();
        if (t == "tdoa") s.task = Task::Tdoa;
        else if (t == "localization") s.task = Task::Localization;
        else throw InvalidArgument("unknown task: " + t);
      } else if (key == "scenario") s.scenario_overrides = v;
      else if (key == "sweep") {
        s.sweep = parse_sweep_variable(v.at("variable").get<std::string>());
        s.sweep_values = s.sweep == SweepVariable::None ? std::vector<Json>{Json(nullptr)}
                                                        : v.at("values").get<std::vector<Json>>();
      } else if (key == "orders") s.orders = v.get<std::vector<int>>();
      else if (key == "pair_set") s.pair_set = parse_pair_set(v);
      else if (key == "query") {
        const auto q = v.get<std::string>();
        if (q == "frame-starts") s.query = QueryPolicy::FrameStarts;
        else if (q == "receptions") s.query = QueryPolicy::ReceptionsOfSecond;
        else throw InvalidArgument("unknown query policy: " + q);
      } else if (key == "covariance_mode") {
        const auto m = v.get<std::string>();
        if (m == "diagonal") s.covariance_mode = CovarianceMode::Diagonal;
        else if (m == "structured") s.covariance_mode = CovarianceMode::Structured;
        else throw InvalidArgument("unknown covariance mode: " + m);
      } else if (key == "reference") s.reference = v.get<std::size_t>();
      else if (key == "trials") s.trials = v.get<std::size_t>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else if (key == "outlier_threshold_m") s.outlier_threshold_m = v.get<double>();
      else if (key == "per_pair") s.per_pair = v.get<bool>();
      else if (key == "acceptance") s.acceptance = v.get<bool>();
      else if (key == "gate") {
        for (const auto& [gk, gv] : v.items()) {
          if (gk == "kind") s.gate.kind = gv.get<std::string>();
          else if (gk == "tolerance") s.gate.tolerance = gv.get<double>();
          else if (gk == "better") s.gate.better = gv.get<int>();
          else if (gk == "worse") s.gate.worse = gv.get<int>();
          else if (gk == "min_sweep") s.gate.min_sweep = gv.get<double>();
          else if (gk == "max_sweep") s.gate.max_sweep = gv.get<double>();
          else if (gk == "factor") s.gate.factor = gv.get<double>();
          else if (gk == "inversions") s.gate.inversions = gv.get<int>();
          else if (gk == "max_exclusion") s.gate.max_exclusion = gv.get<double>();
          else throw InvalidArgument("unknown gate key: " + gk);
        }
      } else if (key == "description") {
        // free text, ignored
      } else {
        throw InvalidArgument("unknown experiment key: " + key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed experiment spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::filesystem::path preset_directory() {
  if (const char* env = std::getenv("PTDOA_PRESETS"); env && *env) return env;
  return PTDOA_PRESET_DIR;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(preset_directory(), ec)) {
    if (entry.path().extension() == ".json") names.push_back(entry.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

ExperimentSpec load_experiment(const std::string& name_or_path) {
  std::filesystem::path path(name_or_path);
  if (!std::filesystem::is_regular_file(path)) path = preset_directory() / (name_or_path + ".json");
  std::ifstream in(path);
  if (!in) throw InvalidArgument("no preset or spec file named " + name_or_path);
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
  return experiment_spec_from_json(j);
}

// ---- runner --------------------------------------------------------------

std::mt19937_64 trial_rng(std::uint64_t master_seed, std::uint64_t trial) {
  const std::uint64_t a = splitmix64(master_seed ^ splitmix64(trial));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return std::mt19937_64(seq);
}

ExperimentResult run_experiment(const ExperimentSpec& spec, unsigned threads, bool bounds_only) {
  spec.validate();
  ExperimentResult result;
  result.spec = spec;
  for (const auto& value : spec.sweep_values) {
    const auto started = std::chrono::steady_clock::now();
    const Setting setting = setting_for(spec, value);
    const std::string label = value_label(value);
    const auto pairs = anchor_pairs(setting.pair_set, setting.config.anchor_count);
    if (spec.task == Task::Localization && spec.reference >= setting.config.anchor_count) {
      throw InvalidArgument("reference anchor out of range");
    }

    using Outcomes = std::vector<OrderOutcome>;
    const auto per_trial = parallel_trials<Outcomes>(spec.trials, threads, [&](std::size_t t) {
      auto rng = trial_rng(spec.seed, t);
      Outcomes out;
      CampaignLog log;
      try {
        log = simulate_campaign(sample_scenario(setting.config, rng), rng);
      } catch (const Error& e) {
        OrderOutcome failed;
        failed.failed = true;
        failed.note = e.what();
        return Outcomes(setting.orders.size(), failed);
      }
      for (int order : setting.orders) {
        out.push_back(spec.task == Task::Tdoa
                          ? run_tdoa_order(log, pairs, order, spec.query, bounds_only)
                          : run_localization_order(log, order, spec, bounds_only));
      }
      return out;
    });

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    for (std::size_t k = 0; k < setting.orders.size(); ++k) {
      std::vector<OrderOutcome> outcomes;
      outcomes.reserve(per_trial.size());
      for (const auto& o : per_trial) outcomes.push_back(o[k]);
      const int order = setting.orders[k];
      std::vector<TrialRecord> records;
      ResultRow row;
      if (spec.task == Task::Tdoa) {
        row = reduce_tdoa(spec, label, order, outcomes, records);
        const NoiseModel noise = setting.config.noise_model();
        row.crlb1 = std::sqrt(sigma_n2(noise));
        row.theory = std::sqrt(theoretical_tdoa_variance(pairs, setting.config.timing, order, noise));
      } else {
        row = reduce_localization(label, order, outcomes, records, bounds_only);
      }
      if (bounds_only) {
        row.rmse = row.rms = row.bias = row.variance = row.nees = kNaN;
        records.clear();
      }
      row.experiment = spec.name;
      row.sweep_variable = sweep_variable_name(spec.sweep);
      row.sweep_value = label;
      row.runtime_s = elapsed;
      result.rows.push_back(row);
      if (spec.task == Task::Tdoa && spec.per_pair && !bounds_only) {
        for (auto& pair_row : per_pair_rows(spec, label, order, pairs, outcomes)) {
          pair_row.crlb1 = row.crlb1;
          pair_row.runtime_s = elapsed;
          result.rows.push_back(std::move(pair_row));
        }
      }
      for (auto& r : records) result.trials.push_back(std::move(r));
    }
  }
  return result;
}

// ---- gates ---------------------------------------------------------------

GateResult evaluate_gate(const ExperimentResult& result) {
  const Gate& g = result.spec.gate;
  GateResult out;
  auto fail = [&](const std::string& msg) {
    out.passed = false;
    out.messages.push_back("FAIL " + msg);
  };
  auto note = [&](const std::string& msg) { out.messages.push_back("ok   " + msg); };

  if (g.kind == "none") return out;
  if (g.kind == "tdoa-efficiency") {
    for (const auto& row : result.rows) {
      if (is_pair_row(row) || !in_window(g, row)) continue;
      const double ratio = row.rmse / row.crlb2;
      const std::string msg = describe(row) + ": rmse/sqrt(CRLB1)=" + num(row.rmse / row.crlb1) +
                              " rmse/sqrt(CRLB2)=" + num(ratio) + " excluded=" + num(row.exclusion_rate);
      const bool ok = row.rmse < row.crlb1 && std::abs(ratio - 1.0) <= g.tolerance &&
                      row.exclusion_rate <= g.max_exclusion;
      ok ? note(msg) : fail(msg);
    }
  } else if (g.kind == "bound-ratio") {
    for (const auto& row : result.rows) {
      if (is_pair_row(row) || !in_window(g, row)) continue;
      const double ratio = row.rms / row.crlb2;
      const std::string msg = describe(row) + ": rms/sqrt(CRLB2)=" + num(ratio) + " excluded=" + num(row.exclusion_rate);
      (std::abs(ratio - 1.0) <= g.tolerance && row.exclusion_rate <= g.max_exclusion) ? note(msg) : fail(msg);
    }
  } else if (g.kind == "order-tradeoff") {
    const auto better = rows_for_order(result, g.better);
    const auto worse = rows_for_order(result, g.worse);
    if (better.empty() || worse.size() != better.size()) fail("orders missing from the result table");
    for (std::size_t k = 0; k < std::min(better.size(), worse.size()); ++k) {
      if (!in_window(g, *better[k])) continue;
      const std::string msg = better[k]->sweep_variable + "=" + better[k]->sweep_value + ": L=" +
                              std::to_string(g.better) + " " + num(better[k]->rmse) + " vs L=" +
                              std::to_string(g.worse) + " " + num(worse[k]->rmse);
      better[k]->rmse < worse[k]->rmse ? note(msg) : fail(msg);
    }
  } else if (g.kind == "monotone") {
    for (int order : result.spec.orders) {
      const auto rows = rows_for_order(result, order);
      int increases = 0;
      for (std::size_t k = 1; k < rows.size(); ++k)
        if (rows[k]->rmse > rows[k - 1]->rmse) ++increases;
      std::string series;
      for (const auto* r : rows) series += " " + r->sweep_value + ":" + num(r->rmse);
      const std::string msg = "L=" + std::to_string(order) + " increases=" + std::to_string(increases) + series;
      increases <= g.inversions ? note(msg) : fail(msg);
      if (!rows.empty()) {
        const std::string ex = describe(*rows.front()) + ": excluded=" + num(rows.front()->exclusion_rate);
        rows.front()->exclusion_rate <= g.max_exclusion ? note(ex) : fail(ex);
      }
    }
  } else if (g.kind == "flat") {
    // Across anchor pairs when per-pair rows exist, otherwise across the sweep.
    const bool pairs = std::any_of(result.rows.begin(), result.rows.end(), is_pair_row);
    for (int order : result.spec.orders) {
      if (g.better > 0 && order != g.better) continue;
      std::vector<const ResultRow*> rows;
      for (const auto& r : result.rows)
        if (r.order == order && is_pair_row(r) == pairs) rows.push_back(&r);
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      for (const auto* r : rows) {
        lo = std::min(lo, r->rmse);
        hi = std::max(hi, r->rmse);
      }
      const std::string msg = "L=" + std::to_string(order) + " max/min rmse=" + num(hi / lo);
      hi / lo <= g.factor ? note(msg) : fail(msg);
    }
  } else {
    fail("unknown gate kind " + g.kind);
  }
  return out;
}

// ---- output --------------------------------------------------------------

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "experiment,sweep_variable,sweep_value,order,trials,samples,excluded,exclusion_rate,"
         "rmse,rms,bias,variance,nees,crlb1,crlb2,theory\n";
  for (const auto& r : rows) {
    out << r.experiment << ',' << r.sweep_variable << ',' << r.sweep_value << ',' << r.order << ',' << r.trials
        << ',' << r.samples << ',' << r.excluded << ',' << format_double(r.exclusion_rate) << ','
        << format_double(r.rmse) << ',' << format_double(r.rms) << ',' << format_double(r.bias) << ','
        << format_double(r.variance) << ',' << format_double(r.nees) << ',' << format_double(r.crlb1) << ','
        << format_double(r.crlb2) << ',' << format_double(r.theory) << '\n';
  }
}

void write_trials_csv(std::ostream& out, const ExperimentResult& result) {
  out << "experiment,sweep_value,order,trial,status,metric,mse,note\n";
  for (const auto& t : result.trials) {
    std::string note = t.note;
    std::replace(note.begin(), note.end(), ',', ';');
    out << result.spec.name << ',' << t.sweep_value << ',' << t.order << ',' << t.trial << ',' << t.status << ','
        << format_double(t.metric) << ',' << format_double(t.mse) << ',' << note << '\n';
  }
}

Json metadata_json(const ExperimentResult& result, unsigned threads) {
  Json runtimes = Json::array();
  for (const auto& r : result.rows) {
    runtimes.push_back({{"sweep_value", r.sweep_value}, {"order", r.order}, {"runtime_s", r.runtime_s}});
  }
  return {{"spec", to_json(result.spec)},
          {"seed", result.spec.seed},
          {"build", build_version()},
          {"threads", threads},
          {"runtime", runtimes}};
}

void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result, unsigned threads) {
  std::filesystem::create_directories(dir);
  const std::string name = result.spec.name;
  {
    std::ofstream out(dir / (name + ".csv"));
    write_results_csv(out, result.rows);
  }
  {
    std::ofstream out(dir / (name + "_trials.csv"));
    write_trials_csv(out, result);
  }
  std::ofstream out(dir / (name + ".json"));
  out << metadata_json(result, threads).dump(2) << '\n';
  if (!out) throw Error("failed to write results to " + dir.string());
}

const char* build_version() { return PTDOA_VERSION; }

}  // namespace ptdoa
