#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "osco/estimation.hpp"
#include "osco/identification.hpp"
#include "osco/scm.hpp"

namespace osco {

struct KernelParams {
  double length_scale = 1.0;
  double signal_variance = 1.0;
  double noise_variance = 0.006737946999085467;  // e^-5
};

using ScalarFn = std::function<double(std::span<const double>)>;

/// Exact GP regression with kernel RBF(x, x') + s(x) s(x') around a prior mean m(x).
class GpModel {
 public:
  GpModel(int dim, KernelParams hyper, ScalarFn prior_mean = {}, ScalarFn prior_std_scale = {});

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(targets_.size()); }
  const KernelParams& hyper() const { return hyper_; }
  /// Diagonal jitter that the factorisation needed (0 when none).
  double jitter() const { return jitter_; }

  double prior_mean(std::span<const double> x) const;
  double prior_std_scale(std::span<const double> x) const;
  double kernel(std::span<const double> a, std::span<const double> b) const;

  struct Point {
    double mean = 0.0;
    /// Latent standard deviation; the noise term is not included.
    double std = 0.0;
  };
  Point posterior(std::span<const double> x) const;
  /// Gradient of the posterior mean. The RBF part is analytic; prior terms use
  /// central differences.
  std::vector<double> mean_gradient(std::span<const double> x) const;

  /// Refits with one more training pair.
  GpModel with_point(std::span<const double> x, double y) const;

  const std::vector<std::vector<double>>& inputs() const { return inputs_; }
  const std::vector<double>& outputs() const { return outputs_; }

 private:
  friend GpModel fit_gp(const std::vector<std::vector<double>>&, const std::vector<double>&, ScalarFn, ScalarFn,
                        const KernelParams&);
  void refit();

  int dim_;
  KernelParams hyper_;
  ScalarFn prior_mean_;
  ScalarFn prior_std_;
  std::vector<std::vector<double>> inputs_;
  std::vector<double> outputs_;
  std::vector<double> scales_;  // s(x_i)
  Eigen::VectorXd targets_;     // y_i - m(x_i)
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
};

/// Throws std::runtime_error when the kernel matrix stays indefinite at jitter 1e-4.
GpModel fit_gp(const std::vector<std::vector<double>>& inputs, const std::vector<double>& outputs,
               ScalarFn prior_mean = {}, ScalarFn prior_std_scale = {}, const KernelParams& hyper = {});

struct GpPosterior {
  std::vector<double> means;
  std::vector<double> stds;
};
GpPosterior gp_posterior(const GpModel& model, const std::vector<std::vector<double>>& queries);

/// 1/2 log det(I + K / noise) under the RBF part of `hyper`.
double information_gain(const std::vector<std::vector<double>>& rows, const KernelParams& hyper);

/// Incremental Cholesky of I + K / noise; rows are appended one at a time.
class GainTracker {
 public:
  explicit GainTracker(KernelParams hyper = {});

  int size() const { return n_; }
  double gain() const { return gain_; }
  /// Gain after appending `row`, without storing it.
  double gain_with(std::span<const double> row) const;
  void add(std::span<const double> row);
  const KernelParams& hyper() const { return hyper_; }
  /// Same rows under new kernel parameters.
  GainTracker with_hyper(KernelParams hyper) const;

 private:
  double diag_term(std::span<const double> row, Eigen::VectorXd& l) const;

  KernelParams hyper_;
  int n_ = 0;
  std::vector<std::vector<double>> rows_;
  Eigen::MatrixXd chol_;  // leading n_ x n_ block is live
  double gain_ = 0.0;
};

struct PriorOptions {
  /// 0 picks 32 in 1-D, 8 per axis in 2-D and 4 per axis otherwise.
  int points_per_dim = 0;
  EstimatorOptions estimator{200, 0};
};

/// Do-calculus estimates tabulated on a grid over the intervention domain.
class CausalPrior {
 public:
  /// Unavailable prior: zero mean, unit std scale.
  CausalPrior() = default;

  bool available() const { return available_; }
  const std::string& reason() const { return reason_; }
  double mean(std::span<const double> x) const;
  double std_scale(std::span<const double> x) const;
  ScalarFn mean_fn() const;
  ScalarFn std_fn() const;

  /// Grid points in row-major order, with the tabulated values.
  std::vector<std::vector<double>> grid_points() const;
  const std::vector<double>& grid_means() const;
  const std::vector<double>& grid_stds() const;

 private:
  friend CausalPrior build_causal_prior(const Estimand*, const FittedScm*, const std::vector<std::string>&,
                                        const std::vector<Domain>&, const PriorOptions&);
  struct Table {
    std::vector<std::vector<double>> axes;
    bool finite = false;
    std::vector<double> means;
    std::vector<double> stds;
    double interpolate(const std::vector<double>& values, std::span<const double> x) const;
  };
  bool available_ = false;
  std::string reason_ = "no estimand";
  std::shared_ptr<const Table> table_;
};

/// `estimand` null means not identifiable; `fitted` null means no data.
/// Estimation failures (missing columns) also give an unavailable prior.
CausalPrior build_causal_prior(const Estimand* estimand, const FittedScm* fitted,
                               const std::vector<std::string>& vars, const std::vector<Domain>& domains,
                               const PriorOptions& opts = {});

/// Surrogate for one intervention set.
struct ArmSurrogate {
  VarSet set;
  std::vector<std::string> vars;  // sorted
  std::vector<Domain> domains;
  CausalPrior prior;
  GpModel model;
};
using SurrogateBank = std::map<VarSet, ArmSurrogate>;

/// Scrambled Halton points in [0,1]^dim; dimension at most 16.
std::vector<std::vector<double>> scrambled_halton(int n, int dim, std::uint64_t seed);

/// Candidate levels for a set: all finite combinations, else Halton points over the box.
std::vector<std::vector<double>> candidate_points(const std::vector<Domain>& domains, int n, std::uint64_t seed);

/// Minimisation EI with exploration offset xi.
double expected_improvement(double mean, double std, double incumbent, double xi);

struct AcquisitionOptions {
  double xi = 0.01;
  int n_candidates = 512;
  std::uint64_t seed = 0;
};

struct Acquisition {
  Intervention iv;
  /// EI divided by the intervention cost.
  double value = 0.0;
  double ei = 0.0;
};

/// Argmax of EI / c(X, i) over every set in the bank. Ties go to the smaller
/// set label, then the lexicographically smaller level vector.
Acquisition causal_expected_improvement(const SurrogateBank& bank,
                                        const std::function<double(const VarSet&)>& intervene_cost,
                                        double incumbent, const AcquisitionOptions& opts = {});

}  // namespace osco
