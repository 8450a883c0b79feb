#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "osco/costs.hpp"
#include "osco/estimation.hpp"
#include "osco/identification.hpp"
#include "osco/scm.hpp"
#include "osco/stopping.hpp"
#include "osco/surrogate.hpp"

namespace osco {

enum class PolicyKind { Osco, EpsilonGreedy, AlwaysObserve, AlwaysIntervene, Random };

struct TradeoffPolicy {
  PolicyKind kind = PolicyKind::Osco;
  /// Observation probability for Random.
  double p = 0.5;

  /// "osco", "epsilon_greedy", "observe", "intervene", "random(0.3)".
  std::string name() const;
  /// Inverse of name(); throws std::invalid_argument.
  static TradeoffPolicy parse(const std::string& text);
  bool operator==(const TradeoffPolicy&) const = default;
};

struct RunConfig {
  CostModel costs;
  StoppingWeights weights;
  /// Surrogate kernel for the objective and the information gain.
  KernelParams kernel;
  /// Fitted structural models.
  FitOptions fit;
  /// Lookahead simulations per decision.
  int n_mc = 10;
  /// Monte-Carlo draws per causal-prior grid point.
  int prior_mc = 200;
  int prior_points_per_dim = 0;
  double xi = 0.01;
  int n_candidates = 512;
  /// Observation count at which epsilon-greedy saturates.
  double epsilon_full_coverage = 100.0;
  /// Monte-Carlo draws for the evaluation-only true objective.
  int truth_mc = 10000;
  bool maximize = false;
  /// Safety bound on loop iterations.
  int max_steps = 5000;
  /// Rows available before the first step, free of charge. Interventional rows
  /// outside the POMIS family are ignored, and causal UCB does not count them as pulls.
  std::shared_ptr<const Dataset> warm_start;
};

struct TraceStep {
  int step = 0;
  /// "observe", "intervene" or "stop".
  std::string stage_kind;
  Intervention iv;
  double cost = 0.0;
  double cum_cost = 0.0;
  double best_mu_hat = std::numeric_limits<double>::quiet_NaN();
  /// True objective at an intervened point; NaN otherwise.
  double true_mu = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
  // Stopping diagnostics (NaN for baselines).
  double reward_now = std::numeric_limits<double>::quiet_NaN();
  double expected_next = std::numeric_limits<double>::quiet_NaN();
  double mc_std = std::numeric_limits<double>::quiet_NaN();
  double budget_remaining = 0.0;
  std::string note;
};

struct Trace {
  std::string scm;
  std::string loop;  // "cbo" or "cucb"
  TradeoffPolicy policy;
  std::uint64_t seed = 0;
  std::vector<TraceStep> steps;
  /// Argmin of the final surrogate over evaluated interventions.
  std::optional<Intervention> best;
  double best_mu_hat = std::numeric_limits<double>::quiet_NaN();
  bool complete = true;
  std::string error;

  int count(const std::string& kind) const;
};

/// Causal BO with the chosen trade-off policy, starting from an empty dataset.
/// Module errors end the run with complete = false and a partial trace.
Trace run_cbo(const ScmSpec& spec, const TradeoffPolicy& policy, std::uint64_t seed, const RunConfig& cfg = {});

/// Causal UCB over POMIS arms of an all-finite model. Each arm's index is the
/// Bernoulli-KL lower confidence bound of its mean on the target range, with
/// plug-in estimates from observations counted as pseudo-pulls. Throws
/// std::invalid_argument for continuous domains.
Trace run_cucb(const ScmSpec& spec, const TradeoffPolicy& policy, std::uint64_t seed, const RunConfig& cfg = {});

/// State seen by the heuristic policies.
struct BaselineState {
  int n_observations = 0;
  /// Vol(V) / Vol(observed) over the candidate's observation set.
  double volume_ratio = kVolumeRatioCap;
  double full_coverage = 100.0;
};

/// Observation probability of epsilon-greedy.
double epsilon_schedule(const BaselineState& s);
/// Throws std::invalid_argument for the OSCO policy.
StopAction select_tradeoff_baseline(const TradeoffPolicy& policy, const BaselineState& s, std::mt19937_64& rng);

struct RegretPoint {
  double cum_cost = 0.0;
  double regret = std::numeric_limits<double>::infinity();
};

/// Running minimum of the true objective at intervened points minus `optimum`,
/// one point per trace step (mirrored when maximising). Infinite until the
/// first intervention. Throws std::invalid_argument for an empty trace.
std::vector<RegretPoint> simple_regret(const Trace& trace, double optimum, bool maximize = false);

/// Cumulative cost at which regret first drops to `eps` or below; infinity if never.
double cost_to_regret(const std::vector<RegretPoint>& curve, double eps);

/// True objective at `iv`: exact for all-Bernoulli noise, otherwise Monte Carlo
/// with a fixed stream so nearby levels share noise.
double true_objective(const ScmSpec& spec, const Intervention& iv, int n_mc = 10000);

struct Optimum {
  Intervention iv;
  double value = 0.0;
};

/// Best intervention over the POMIS sets on a grid (finite domains enumerated),
/// with the best few grid points re-evaluated at `refine_mc` draws.
Optimum grid_optimum(const ScmSpec& spec, int points_per_dim = 201, int grid_mc = 2000, int refine_mc = 100000,
                     bool maximize = false);

/// Trace CSV: a version comment, then step, stage_kind, intervention_set,
/// intervention_values, cost, cum_cost, best_mu_hat, true_mu_at_choice, wall_ms,
/// then the stopping diagnostics. wall_ms is written as 0 unless `with_timing`.
void write_trace_csv(std::ostream& os, const Trace& trace, bool with_timing = false);
Trace read_trace_csv(std::istream& is);

}  // namespace osco
