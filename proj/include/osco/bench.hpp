#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "osco/ini.hpp"
#include "osco/optimizer.hpp"

namespace osco {

/// Environment variable that prefixes relative output directories.
inline constexpr const char* kOutputRootEnv = "OSCO_OUTPUT_ROOT";

enum class LoopKind { Auto, Cbo, Cucb };

struct ExperimentConfig {
  /// Builtin names or SCM file paths.
  std::vector<std::string> scms;
  std::vector<TradeoffPolicy> policies{{PolicyKind::Osco}, {PolicyKind::EpsilonGreedy}};
  /// Auto runs causal UCB on all-finite models and causal BO otherwise.
  LoopKind loop = LoopKind::Auto;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  RunConfig run;
  /// Observation cost per variable, one run matrix per value; empty keeps run.costs.
  std::vector<double> obs_cost_grid;
  double regret_eps = 0.1;
  std::string output_dir = "results";
  int workers = 1;
  /// Writes measured wall_ms into traces (reruns then differ in that column).
  bool record_timing = false;
  // Grid oracle for the optimum used by the regret.
  int optimum_points = 201;
  int optimum_mc = 2000;
  int optimum_refine_mc = 100000;
};

/// Throws ParseError (line, column) for syntax errors, unknown sections or keys,
/// bad values and unresolvable SCMs.
ExperimentConfig parse_config(const std::string& text);
/// parse_config on a file; throws std::runtime_error when it cannot be read.
ExperimentConfig load_config(const std::filesystem::path& path);

/// One config per obs_cost_grid value (grid cleared, observe cost set); the
/// config itself when the grid is empty.
std::vector<ExperimentConfig> expand_ablation(const ExperimentConfig& cfg);

/// output_dir, below $OSCO_OUTPUT_ROOT when that is set and output_dir is relative.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

struct RunRecord {
  std::string scm;
  TradeoffPolicy policy;
  std::uint64_t seed = 0;
  double obs_cost = 0.0;
  double optimum = 0.0;
  double final_regret = 0.0;
  double cost_to_eps = 0.0;
  int n_observe = 0;
  int n_intervene = 0;
  double mean_wall_ms = 0.0;
  bool complete = true;
  std::string error;
  std::filesystem::path trace_path;
};

/// Per-seed statistic summarised as mean and sigma / sqrt(n), sigma the sample
/// standard deviation (0 for one seed).
struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;
};
MeanSem mean_sem(const std::vector<double>& xs);

struct AggregateRow {
  std::string scm;
  double obs_cost = 0.0;
  TradeoffPolicy policy;
  int n_seeds = 0;
  int n_failed = 0;
  /// Seeds whose regret reached regret_eps.
  int n_reached = 0;
  MeanSem final_regret, cost_to_eps, n_observe, n_intervene, wall_ms;
};

struct RunSummary {
  std::vector<RunRecord> runs;
  std::vector<AggregateRow> aggregate;
  double regret_eps = 0.1;
  double budget = 300.0;
  bool maximize = false;

  bool all_complete() const;
};

/// Final regret, cost-to-eps, action counts and mean step time of one trace;
/// the stop row is ignored.
RunRecord summarize_trace(const Trace& trace, double optimum, double eps, bool maximize = false);
/// Groups runs by (scm, obs_cost, policy) in first-seen order. Statistics use
/// completed runs only; non-finite values propagate into mean and sem.
std::vector<AggregateRow> aggregate_runs(const std::vector<RunRecord>& runs);

/// Regret optimum of an SCM by the grid oracle (cached per name and settings).
double reference_optimum(const ScmSpec& spec, const ExperimentConfig& cfg);

/// Runs every (scm, obs_cost, policy, seed) cell. Writes traces/<run>.csv,
/// runs.csv and aggregate.csv below resolve_output_dir(cfg). A failed run is
/// recorded and the matrix continues.
RunSummary run_experiment(const ExperimentConfig& cfg);

/// File stem of a run's trace, e.g. "chain__osco__c0.25__s0".
std::string run_stem(const std::string& scm, const TradeoffPolicy& policy, double obs_cost, std::uint64_t seed);

void write_runs_csv(std::ostream& os, const std::vector<RunRecord>& runs);
void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows);

struct OverheadStat {
  std::string label;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  int n = 0;
};

struct OverheadResult {
  OverheadStat baseline;
  OverheadStat osco;
  double ratio = 0.0;  // osco.mean_ms / baseline.mean_ms
};

/// Wall-clock per causal-BO iteration for OSCO and a baseline from the same warm
/// start (warm_rows observations, then one intervention per POMIS set) with an
/// unlimited budget. Five warm-up iterations are dropped; std is the sample std.
/// Throws std::invalid_argument when n_iter < 10.
OverheadResult measure_overhead(const ScmSpec& spec, int n_iter = 100, std::uint64_t seed = 0,
                                const TradeoffPolicy& baseline = {PolicyKind::AlwaysIntervene},
                                RunConfig cfg = {}, int warm_rows = 100);

/// Gnuplot-ready TSVs in `dir`:
///   convergence_<scm>__c<cost>.tsv  policy, cost, regret mean and band per cost unit
///   actions_<scm>__c<cost>.tsv      cumulative observe/intervene counts per step
/// Returns the files written.
std::vector<std::filesystem::path> emit_plot_data(const RunSummary& summary,
                                                  const std::map<std::string, Trace>& traces_by_stem,
                                                  const std::filesystem::path& dir);
/// Regret curve on integer costs 0..budget, averaged over seeds: NaN where any
/// seed has not intervened yet.
struct ConvergencePoint {
  double cost = 0.0;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};
std::vector<ConvergencePoint> convergence_series(const std::vector<std::vector<RegretPoint>>& curves,
                                                 double budget);

void write_convergence_tsv(std::ostream& os, const std::map<std::string, std::vector<ConvergencePoint>>& by_policy);
void write_actions_tsv(std::ostream& os, const std::vector<Trace>& traces);
/// Two bars plus the ratio.
void write_overhead_tsv(std::ostream& os, const OverheadResult& r);

}  // namespace osco
