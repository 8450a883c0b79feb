#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "osco/costs.hpp"
#include "osco/estimation.hpp"
#include "osco/surrogate.hpp"

namespace osco {

/// Cap on Vol(V) / Vol(S), used when the observed box is degenerate.
inline constexpr double kVolumeRatioCap = 100.0;

struct StoppingWeights {
  double eta = 2.0;    // information gain
  double kappa = 1.0;  // surrogate mean at the candidate
  double tau = 5.0;    // volume ratio
  double gamma = 1.0;  // discount
};

/// Running bounding box of observed rows over a fixed column order.
class VolumeBox {
 public:
  VolumeBox() = default;
  explicit VolumeBox(std::vector<Domain> domains);

  int rows() const { return n_; }
  void add(std::span<const double> row);
  VolumeBox with(std::span<const double> row) const;
  /// Vol(domain box) / Vol(observed box), capped at kVolumeRatioCap.
  double ratio() const;

 private:
  std::vector<Domain> domains_;
  std::vector<double> lo_, hi_;
  int n_ = 0;
};

/// Convenience form over rows already projected onto `domains` order.
double volume_ratio(const std::vector<Domain>& domains, const std::vector<std::vector<double>>& rows);

/// Steps 1..T of one stage; T is the last step at which an intervention still fits.
int stage_horizon(double remaining, double observe_cost, double intervene_cost);

/// State S_k for one candidate intervention.
struct StoppingContext {
  Intervention candidate;
  /// Null when the candidate's effect is not identifiable.
  const Estimand* estimand = nullptr;
  /// Null when no data has been collected yet.
  const EffectEstimator* estimator = nullptr;
  const FittedScm* fitted = nullptr;
  /// Columns of the observation a step would buy, in row order.
  std::vector<std::string> mos;
  const GainTracker* gain = nullptr;
  VolumeBox box;
  /// Surrogate posterior mean at the candidate, on the minimisation scale.
  double mu_hat = 0.0;
  /// Sign applied to estimator outputs to reach the minimisation scale.
  double direction = 1.0;
  StoppingWeights weights;
  double observe_cost = 0.0;
  double intervene_cost = 0.0;
  double remaining = std::numeric_limits<double>::infinity();
  int step = 1;
  int horizon = 1;
  bool terminal = false;
};

/// Reward parts evaluated at one state.
struct RewardTerms {
  double gain = 0.0;
  double mu_hat = 0.0;
  double ratio = 0.0;
};
double stopping_reward(const StoppingContext& ctx, const RewardTerms& terms, int step);
double stopping_reward(const StoppingContext& ctx);

enum class StopAction { Intervene, Observe };

struct StoppingDecision {
  StopAction action = StopAction::Intervene;
  double reward_now = 0.0;
  /// gamma * E[r(S_{k+1})] - c(o); NaN when not evaluated.
  double expected_next = std::numeric_limits<double>::quiet_NaN();
  double observe_cost = 0.0;
  /// Standard error of the Monte-Carlo expectation.
  double mc_std = 0.0;
  bool forced = false;
  /// Set when the lookahead could not be evaluated.
  bool flagged = false;
  std::string note;
};

/// One-step lookahead: intervene iff r(S_k) >= gamma E[r(S_k + o)] - c(o), with a
/// tie (within one MC standard error) going to Intervene.
StoppingDecision decide(const StoppingContext& ctx, int n_mc = 10, std::uint64_t seed = 0);

// Finite stopping problems, for checking the lookahead rule against dynamic programming.

struct StoppingInstance {
  int n_states = 0;
  /// Row-stochastic transition matrix.
  std::vector<std::vector<double>> transition;
  /// Stop reward at steps 1..T-1.
  std::vector<double> reward;
  /// Stop reward at step T.
  std::vector<double> terminal_reward;
  double continuation_cost = 0.0;
  double gamma = 1.0;
  int horizon = 1;
};

struct StoppingSolution {
  /// value[k-1][s] for steps k = 1..T.
  std::vector<std::vector<double>> value;
  /// stop[k-1][s].
  std::vector<std::vector<bool>> stop;

  /// States where stopping is chosen with l steps remaining (l = T - k).
  std::vector<int> stopping_set(int remaining) const;
  std::vector<int> continuation_set(int remaining) const;
};

/// Exact Bellman recursion; ties stop.
StoppingSolution backward_induction_oracle(const StoppingInstance& inst);
/// Value of the one-step-lookahead policy, evaluated exactly.
StoppingSolution one_step_lookahead(const StoppingInstance& inst);
/// No transition with positive probability leaves `states`.
bool is_closed(const StoppingInstance& inst, const std::vector<int>& states);

}  // namespace osco
