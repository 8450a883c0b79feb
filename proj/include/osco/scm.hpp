#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "osco/expr.hpp"
#include "osco/graph.hpp"

namespace osco {

/// Exogenous noise law. For Normal, a is the mean and b the standard deviation;
/// for Uniform, [a, b]; for Bernoulli, a is the success probability.
struct Noise {
  enum class Kind { Normal, Uniform, Bernoulli };
  Kind kind = Kind::Normal;
  double a = 0.0;
  double b = 1.0;

  double mean() const;
  std::string to_string() const;
  static Noise parse(const std::string& text);
};

/// Closed interval, or a finite set of levels when `finite` is set.
struct Domain {
  bool finite = false;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> levels;

  bool contains(double v, double tol = 1e-12) const;
  double width() const { return hi - lo; }
  std::string to_string() const;
  static Domain interval(double lo, double hi);
  static Domain set(std::vector<double> levels);
  static Domain parse(const std::string& text);
};

/// do(targets = values). Empty targets is the null intervention (pure observation).
struct Intervention {
  std::vector<std::string> targets;
  std::vector<double> values;

  Intervention() = default;
  Intervention(std::vector<std::string> t, std::vector<double> v);

  bool empty() const { return targets.empty(); }
  VarSet target_set() const { return VarSet(targets.begin(), targets.end()); }
  double value_of(const std::string& v) const;
  /// Targets sorted by name, e.g. "B,W"; "" for the null intervention.
  std::string set_label() const;
  /// "B=0.5;W=-1" with values printed round-trip exactly.
  std::string values_label() const;
  bool operator==(const Intervention& o) const = default;
};

enum class RowKind { Observational, Interventional };

struct SampleRow {
  std::map<std::string, double> values;
  RowKind kind = RowKind::Observational;
  Intervention iv;
  int step = 1;
  double cost = 0.0;

  bool has(const std::string& v) const { return values.count(v) > 0; }
  bool has_all(const VarSet& vs) const;
  double at(const std::string& v) const;
};

struct BenchmarkReference {
  std::optional<Family> mis;
  std::optional<Family> pomis;
  std::map<VarSet, VarSet> mos;
  std::optional<Intervention> optimum;
  std::optional<double> optimum_value;
};

struct ScmSpec {
  std::string name;
  CausalGraph graph;
  std::map<std::string, Expr> functions;
  std::vector<std::string> noise_order;
  std::map<std::string, Noise> noise;
  VarSet manipulative;
  VarSet non_manipulative;
  std::string target;
  double target_bound = 0.0;
  std::map<std::string, Domain> domains;
  /// Extra additive Gaussian noise on measured targets. The default 0 leaves the
  /// target's own noise term as the measurement noise.
  double measurement_std = 0.0;
  BenchmarkReference reference;

  bool all_finite(const VarSet& vs) const;
  bool all_finite() const { return all_finite(graph.node_set()); }
  /// Noise term -> nodes whose functions read it.
  std::map<std::string, VarSet> noise_users() const;
};

struct ValidationReport {
  std::vector<std::string> issues;
  bool ok() const { return issues.empty(); }
};

ValidationReport validate(const ScmSpec& spec);

/// Parses the sectioned SCM format ([nodes] [edges] [bidirected] [functions]
/// [noise] [domains] [roles] and optional [reference]). Throws ParseError.
ScmSpec parse_scm(const std::string& text, const std::string& name);
ScmSpec load_scm_file(const std::string& path);
/// Inverse of parse_scm (reference data included).
std::string serialize_scm(const ScmSpec& spec);

/// Throws std::invalid_argument for unknown targets, targets outside the
/// manipulative set, dimension mismatch or values outside the domain.
void check_intervention(const ScmSpec& spec, const Intervention& iv);

/// Evaluates the structural functions of a (possibly mutilated) model.
class ScmSampler {
 public:
  ScmSampler(const ScmSpec& spec, const Intervention& iv);

  /// Draws one joint sample of every node; values follow spec.graph.nodes().
  void draw(std::mt19937_64& rng, std::vector<double>& out);
  int index_of(const std::string& node) const;

 private:
  struct Step {
    int slot;
    bool fixed;
    double value;
    CompiledExpr fn;
  };
  const ScmSpec* spec_;
  std::vector<Step> steps_;
  std::vector<Noise> noises_;
  int n_nodes_;
  std::vector<double> slots_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

std::vector<SampleRow> sample_observational(const ScmSpec& spec, const VarSet& observe, int n,
                                            std::uint64_t seed);
/// Rows hold every node of the mutilated model; the target carries
/// measurement noise when measurement_std > 0.
std::vector<SampleRow> sample_interventional(const ScmSpec& spec, const Intervention& iv, int n,
                                             std::uint64_t seed);

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo mean of the target under do(iv). Evaluation-only oracle.
MeanEstimate mc_ground_truth(const ScmSpec& spec, const Intervention& iv, int n,
                             std::uint64_t seed = 7);

/// Exact mean by enumerating every joint noise outcome; all noise must be Bernoulli.
double exact_discrete_mean(const ScmSpec& spec, const Intervention& iv);

/// Names of the builtin benchmarks in registry order.
std::vector<std::string> benchmark_names();
const ScmSpec& builtin_benchmark(const std::string& name);
/// Builtin name or a path to an SCM file.
ScmSpec resolve_scm(const std::string& name_or_path);

std::string format_double(double v);

}  // namespace osco
