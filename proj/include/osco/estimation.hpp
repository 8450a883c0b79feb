#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "osco/identification.hpp"
#include "osco/scm.hpp"

namespace osco {

/// Accumulated rows with cost accounting.
struct Dataset {
  std::vector<SampleRow> rows;
  double cumulative_cost = 0.0;
  int n_observations = 0;
  int n_interventions = 0;

  /// Appends a row and charges row.cost.
  void add(SampleRow row);
  bool empty() const { return rows.empty(); }
  /// Observational rows holding every variable in `vars`.
  std::vector<const SampleRow*> observational_with(const VarSet& vars) const;
};

/// CSV with one column per node, then kind, intervention, step, cost.
/// Values are written shortest-round-trip so a read gives back identical bits.
void write_dataset_csv(std::ostream& os, const Dataset& data, const std::vector<std::string>& nodes);
Dataset read_dataset_csv(std::istream& is);

struct FitOptions {
  double length_scale = 1.0;
  /// Floor for the regression noise variance.
  double noise_variance = 0.006737946999085467;  // e^-5
  /// Residual GP uses at most this many (strided) rows.
  int gp_max_points = 300;
  /// Linear rather than constant regression mean under the residual GP.
  bool linear_mean = false;
};

struct Prediction {
  double mean = 0.0;
  /// Uncertainty of the conditional mean.
  double mean_var = 0.0;
  /// Spread of a single draw around the mean.
  double noise_var = 0.0;
};

/// P(outputs | inputs) fitted from rows.
class ConditionalModel {
 public:
  virtual ~ConditionalModel() = default;

  const std::vector<std::string>& outputs() const { return outputs_; }
  const std::vector<std::string>& inputs() const { return inputs_; }
  int n_rows() const { return n_rows_; }

  /// Mean of the first output.
  virtual Prediction predict(std::span<const double> x) const = 0;
  /// Writes one draw of every output.
  virtual void sample(std::span<const double> x, std::mt19937_64& rng, std::span<double> out) const = 0;
  /// Model refreshed with one extra row (inputs then outputs).
  virtual std::shared_ptr<const ConditionalModel> with_point(std::span<const double> x,
                                                             std::span<const double> y) const = 0;
  /// Spread of the first output's conditional mean across inputs.
  virtual double signal_variance() const = 0;
  /// Spread of a draw around its conditional mean, averaged over rows.
  virtual double noise_variance() const = 0;

 protected:
  std::vector<std::string> outputs_;
  std::vector<std::string> inputs_;
  int n_rows_ = 0;
};

/// Bootstrap over observed joint values; no inputs.
std::shared_ptr<const ConditionalModel> fit_empirical(const std::vector<std::string>& outputs,
                                                      const std::vector<std::vector<double>>& values);
/// Linear mean plus an RBF GP on the residuals, single output.
std::shared_ptr<const ConditionalModel> fit_gp_regressor(const std::string& output,
                                                         const std::vector<std::string>& inputs,
                                                         const std::vector<std::vector<double>>& x,
                                                         const std::vector<double>& y,
                                                         const FitOptions& opts);
/// Empirical conditional table for finite domains; empty cells use the output marginal.
/// Given the levels of each output, draws come from the Dirichlet(1) posterior
/// predictive over joint levels, so a few rows do not pin every draw; predictions
/// remain plain frequencies.
std::shared_ptr<const ConditionalModel> fit_table(const std::vector<std::string>& outputs,
                                                  const std::vector<std::string>& inputs,
                                                  const std::vector<std::vector<double>>& rows,
                                                  std::vector<std::vector<double>> output_levels = {});

/// Node and factor models of F-hat. Conditional models are fitted on demand and cached.
class FittedScm {
 public:
  FittedScm(const ScmSpec& spec, Dataset data, FitOptions opts = {});
  FittedScm(const FittedScm& other);
  FittedScm& operator=(const FittedScm& other);

  const ScmSpec& spec() const { return *spec_; }
  const Dataset& data() const { return *data_; }
  const FitOptions& options() const { return opts_; }

  /// Model of node | parents, fitted when some row holds the node and all its parents.
  bool has_node_model(const std::string& node) const;
  /// Throws std::out_of_range for an unfitted node.
  std::shared_ptr<const ConditionalModel> node_model(const std::string& node) const;

  /// Model of P(outputs | inputs) from observational rows holding all of them.
  /// Throws std::runtime_error when no row qualifies.
  std::shared_ptr<const ConditionalModel> conditional(const std::vector<std::string>& outputs,
                                                      const std::vector<std::string>& inputs) const;

  /// Same models with one more observational row folded in.
  FittedScm with_row(const SampleRow& row) const;

 private:
  using Key = std::pair<std::vector<std::string>, std::vector<std::string>>;
  std::shared_ptr<const ConditionalModel> fit_uncached(const Key& key) const;

  const ScmSpec* spec_;
  std::shared_ptr<const Dataset> data_;
  FitOptions opts_;
  mutable std::map<Key, std::shared_ptr<const ConditionalModel>> cache_;
  mutable std::unique_ptr<std::mutex> mutex_;
};

FittedScm fit_scm_models(const ScmSpec& spec, const Dataset& data, const FitOptions& opts = {});

struct EffectEstimate {
  double mean = 0.0;
  double std = 0.0;
  /// Set when an empty conditioning cell fell back to a marginal.
  bool flagged = false;
};

struct EstimatorOptions {
  int n_mc = 1000;
  std::uint64_t seed = 0;
};

/// Evaluates one estimand at many intervention levels. Continuous estimands are
/// integrated by sampling bound variables from fitted factors; when every
/// variable is finite the sum is exact over empirical conditional tables.
class EffectEstimator {
 public:
  EffectEstimator(const Estimand& estimand, const FittedScm& fitted, EstimatorOptions opts = {});

  EffectEstimate operator()(const Intervention& iv) const;
  bool discrete() const { return discrete_; }
  /// Estimator over fitted.with_row(row); random numbers are shared with this one.
  EffectEstimator with_row(const SampleRow& row) const;

 private:
  struct Factor {
    std::vector<int> outputs;  // symbols
    std::vector<int> inputs;
    std::shared_ptr<const ConditionalModel> model;
  };
  void plan_continuous();
  EffectEstimate eval_continuous(const Intervention& iv) const;
  EffectEstimate eval_discrete(const Intervention& iv) const;

  Estimand estimand_;
  FittedScm fitted_;
  EstimatorOptions opts_;
  bool discrete_ = false;

  // Continuous plan.
  std::vector<std::string> symbol_var_;
  std::vector<int> fixed_symbols_;
  std::map<int, double> arbitrary_levels_;
  std::vector<Factor> factors_;  // sampling order
  int target_symbol_ = -1;
  int mean_factor_ = -1;  // factor whose mean gives the target, or -1 to sample it
  bool joint_shortcut_ = false;

  // Discrete plan: counts per factor, keyed by (outputs, inputs).
  struct CountTable {
    std::map<std::vector<double>, std::map<std::vector<double>, int>> cells;
    std::map<std::vector<double>, int> cell_totals;
    std::map<std::vector<double>, int> marginal;
    int total = 0;
  };
  void plan_discrete();
  double eval_node(const EstNode& e, std::map<std::string, double>& env, const Intervention& iv,
                   bool& flagged) const;
  std::map<std::pair<std::vector<std::string>, std::vector<std::string>>, CountTable> tables_;
  std::map<std::string, double> discrete_arbitrary_;
};

EffectEstimate estimate_causal_effect(const Estimand& estimand, const FittedScm& fitted,
                                      const Intervention& iv, const EstimatorOptions& opts = {});
EffectEstimate estimate_causal_effect(const Estimand& estimand, const ScmSpec& spec, const Dataset& data,
                                      const Intervention& iv, const EstimatorOptions& opts = {});

/// One simulated observational row over `mos`, drawn ancestrally through fitted
/// conditionals (each node given its d-separation-pruned predecessors in `mos`).
SampleRow simulate_observation(const FittedScm& fitted, const VarSet& mos, std::uint64_t seed);

}  // namespace osco
