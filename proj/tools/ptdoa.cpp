// Command-line front end: simulate campaigns, estimate TDOAs, localize, tabulate bounds,
// and run the Monte Carlo experiment presets.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ptdoa/analysis.hpp"
#include "ptdoa/harness.hpp"

using namespace ptdoa;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string out_dir = "results";
  unsigned threads = 1;
  bool check = false;
};

struct CampaignSource {
  std::string log_path;
  std::string config_path;
  std::optional<std::size_t> frames;
  std::optional<std::size_t> anchors;
  std::string motion;
};

void add_campaign_options(CLI::App* app, CampaignSource& src) {
  app->add_option("--log", src.log_path, "Replay a campaign CSV instead of simulating");
  app->add_option("--config", src.config_path, "Scenario config JSON (defaults otherwise)");
  app->add_option("--frames", src.frames, "Number of frames N_f");
  app->add_option("--anchors", src.anchors, "Number of anchors N_a");
  app->add_option("--motion", src.motion, "static | linear | circular | accelerated");
}

ScenarioConfig load_config(const CampaignSource& src) {
  ScenarioConfig config;
  if (!src.config_path.empty()) {
    std::ifstream in(src.config_path);
    if (!in) throw InvalidArgument("cannot open " + src.config_path);
    config = scenario_config_from_json(Json::parse(in));
  }
  if (src.frames) config.timing.frames = *src.frames;
  if (src.anchors) config.anchor_count = *src.anchors;
  if (!src.motion.empty()) config.motion = parse_motion_kind(src.motion);
  config.validate();
  return config;
}

CampaignLog obtain_campaign(const CampaignSource& src, const Globals& g) {
  if (!src.log_path.empty()) {
    std::ifstream in(src.log_path);
    if (!in) throw InvalidArgument("cannot open " + src.log_path);
    return read_campaign_csv(in);
  }
  auto rng = trial_rng(g.seed.value_or(1), 0);
  const Scenario scenario = sample_scenario(load_config(src), rng);
  return simulate_campaign(scenario, rng);
}

/// Writes to `path`, or stdout when it is empty or "-".
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path);
  fn(out);
}

std::vector<AnchorPair> parse_pairs(const std::string& text, std::size_t anchors) {
  if (text == "set1") return anchor_pairs(PairSet::Set1, anchors);
  if (text == "set2") return anchor_pairs(PairSet::Set2, anchors);
  if (text == "set3") return anchor_pairs(PairSet::Set3, anchors);
  std::vector<AnchorPair> pairs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) throw InvalidArgument("pairs are written i-j: " + item);
    pairs.push_back({std::stoul(item.substr(0, dash)), std::stoul(item.substr(dash + 1))});
  }
  return pairs;
}

std::string join(const Vector& v) {
  std::string out;
  for (Eigen::Index k = 0; k < v.size(); ++k) out += (k ? "," : "") + format_double(v[k]);
  return out;
}

int run_experiments(const std::vector<std::string>& names, const Globals& g, bool bounds_only) {
  bool all_passed = true;
  for (const auto& name : names) {
    ExperimentSpec spec = load_experiment(name);
    if (g.seed) spec.seed = *g.seed;
    if (g.trials) spec.trials = *g.trials;
    const ExperimentResult result = run_experiment(spec, g.threads, bounds_only);
    if (bounds_only) {
      std::filesystem::create_directories(g.out_dir);
      std::ofstream out(std::filesystem::path(g.out_dir) / (spec.name + "_bounds.csv"));
      write_results_csv(out, result.rows);
      std::cout << "wrote " << (std::filesystem::path(g.out_dir) / (spec.name + "_bounds.csv")).string() << '\n';
      continue;
    }
    write_experiment(g.out_dir, result, g.threads);
    std::cout << "wrote " << (std::filesystem::path(g.out_dir) / (spec.name + ".csv")).string() << '\n';
    if (g.check && spec.acceptance) {
      const GateResult gate = evaluate_gate(result);
      for (const auto& line : gate.messages) std::cout << "  " << line << '\n';
      std::cout << (gate.passed ? "PASS " : "FAIL ") << spec.name << '\n';
      all_passed = all_passed && gate.passed;
    }
  }
  return all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polynomial TDOA estimation and mobile-target localization"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->configurable();
  app.add_option("--trials", g.trials, "Override the number of Monte Carlo trials");
  app.add_option("--out-dir", g.out_dir, "Directory for experiment outputs");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--check", g.check, "Evaluate acceptance gates; exit nonzero when one fails");
  app.fallthrough();

  // simulate
  CampaignSource sim_src;
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "Simulate one broadcast campaign and write its log");
  add_campaign_options(sim, sim_src);
  sim->add_option("--out", sim_out, "Campaign CSV path (stdout by default)");

  // estimate
  CampaignSource est_src;
  std::string est_pairs = "set3", est_query = "receptions", est_out;
  int est_order = 2;
  auto* est = app.add_subcommand("estimate", "Estimate instantaneous TDOAs for anchor pairs");
  add_campaign_options(est, est_src);
  est->add_option("--pairs", est_pairs, "set1 | set2 | set3 | explicit list like 0-1,2-5");
  est->add_option("-L,--order", est_order, "Polynomial model order")->check(CLI::PositiveNumber);
  est->add_option("--query", est_query, "frame-starts | receptions | comma-separated target-local times");
  est->add_option("--out", est_out, "Output CSV path (stdout by default)");

  // localize
  CampaignSource loc_src;
  std::string loc_mode = "diagonal", loc_out;
  int loc_order = 2;
  std::size_t loc_reference = 0;
  std::vector<std::size_t> loc_frames;
  double loc_threshold = 100.0;
  auto* loc = app.add_subcommand("localize", "Localize the target at frame starts");
  add_campaign_options(loc, loc_src);
  loc->add_option("-L,--order", loc_order, "Polynomial model order")->check(CLI::PositiveNumber);
  loc->add_option("--covariance-mode", loc_mode, "diagonal | structured");
  loc->add_option("--reference", loc_reference, "Reference anchor (zero-based)");
  loc->add_option("--frame", loc_frames, "Frames to report (all by default)");
  loc->add_option("--outlier-threshold", loc_threshold, "Exclusion threshold in metres");
  loc->add_option("--out", loc_out, "Output CSV path (stdout by default)");

  // crlb / experiment
  std::vector<std::string> crlb_names, exp_names;
  bool list_presets = false;
  auto* crlb = app.add_subcommand("crlb", "Tabulate bounds for experiment presets or spec files");
  crlb->add_option("experiments", crlb_names, "Preset names or spec.json paths")->required();
  auto* exp = app.add_subcommand("experiment", "Run Monte Carlo experiments");
  exp->add_option("experiments", exp_names, "Preset names, spec.json paths, or 'all'");
  exp->add_flag("--list", list_presets, "List shipped presets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const CampaignLog log = obtain_campaign(sim_src, g);
      emit(sim_out, [&](std::ostream& out) { write_campaign_csv(out, log); });
    } else if (est->parsed()) {
      const CampaignLog log = obtain_campaign(est_src, g);
      const auto pairs = parse_pairs(est_pairs, log.anchors());
      emit(est_out, [&](std::ostream& out) {
        out << "pair_i,pair_j,t_query,tdoa_est,tdoa_var,tdoa_true,error\n";
        for (const auto& pair : pairs) {
          std::vector<double> times;
          if (est_query == "frame-starts") times = query_times(log, pair, QueryPolicy::FrameStarts);
          else if (est_query == "receptions") times = query_times(log, pair, QueryPolicy::ReceptionsOfSecond);
          else {
            std::stringstream ss(est_query);
            std::string t;
            while (std::getline(ss, t, ',')) times.push_back(parse_double(t));
          }
          const auto res = estimate_pair(log, pair, est_order, times);
          for (std::size_t k = 0; k < times.size(); ++k) {
            const double truth = log.true_tdoa_at_local(pair, times[k]);
            out << pair.i << ',' << pair.j << ',' << format_double(times[k]) << ',' << format_double(res[k].tdoa)
                << ',' << format_double(res[k].variance) << ',' << format_double(truth) << ','
                << format_double(res[k].tdoa - truth) << '\n';
          }
        }
      });
    } else if (loc->parsed()) {
      const CampaignLog log = obtain_campaign(loc_src, g);
      CovarianceMode mode = CovarianceMode::Diagonal;
      if (loc_mode == "structured") mode = CovarianceMode::Structured;
      else if (loc_mode != "diagonal") throw InvalidArgument("unknown covariance mode: " + loc_mode);
      const auto fixes = localize_frames(log, loc_order, mode, loc_reference);
      const auto starts = log.frame_start_local_times();
      const int k = log.scenario.dimension;
      emit(loc_out, [&](std::ostream& out) {
        out << "frame,t_u";
        for (int d = 0; d < k; ++d) out << ",est_" << "xyz"[d];
        for (int d = 0; d < k; ++d) out << ",true_" << "xyz"[d];
        out << ",error,nees,excluded\n";
        for (std::size_t m = 0; m < fixes.size(); ++m) {
          if (!loc_frames.empty() && std::find(loc_frames.begin(), loc_frames.end(), m) == loc_frames.end()) continue;
          const Vector err = fixes[m].position - log.frame_start_positions[m];
          const double nees = err.dot(fixes[m].covariance.ldlt().solve(err));
          out << m << ',' << format_double(starts[m]) << ',' << join(fixes[m].position) << ','
              << join(log.frame_start_positions[m]) << ',' << format_double(err.norm()) << ','
              << format_double(nees) << ',' << (err.norm() > loc_threshold ? 1 : 0) << '\n';
        }
      });
    } else if (crlb->parsed()) {
      return run_experiments(crlb_names, g, true);
    } else if (exp->parsed()) {
      if (list_presets) {
        for (const auto& name : preset_names()) std::cout << name << '\n';
        return 0;
      }
      if (exp_names.empty()) throw InvalidArgument("name at least one experiment (or 'all')");
      if (exp_names.size() == 1 && exp_names[0] == "all") exp_names = preset_names();
      return run_experiments(exp_names, g, false);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
