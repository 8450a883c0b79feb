#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "osco/graph.hpp"

namespace osco {

struct EstNode;
using EstPtr = std::shared_ptr<const EstNode>;

/// Node of an observational estimand. Marginal binds its `vars` lexically, so an
/// inner sum over an intervened variable shadows the fixed level (printed primed).
struct EstNode {
  enum class Kind { Factor, Marginal, Product, Quotient, Fixed };
  Kind kind = Kind::Product;
  /// Factor: outcome variables. Marginal: summed variables. Fixed: bound variables.
  std::vector<std::string> vars;
  /// Factor only: conditioning variables.
  std::vector<std::string> given;
  std::vector<EstPtr> children;
  /// Fixed only: the effect does not depend on the chosen level.
  bool arbitrary = false;
};

EstPtr est_factor(std::vector<std::string> outcome, std::vector<std::string> given = {});
EstPtr est_marginal(std::vector<std::string> vars, EstPtr child);
EstPtr est_product(std::vector<EstPtr> children);
EstPtr est_quotient(EstPtr num, EstPtr den);
EstPtr est_fixed(std::vector<std::string> vars, EstPtr child, bool arbitrary = false);

struct Estimand {
  EstPtr root;
  std::string outcome;
  VarSet intervention;

  /// Every variable named anywhere in the tree.
  VarSet variables() const;
  /// Readable form, e.g. "Σ_S P(Y|B,S) P(S)".
  std::string to_string() const;
  /// Same as to_string with conditioning sets and products sorted.
  std::string canonical() const;
};

std::string est_to_string(const EstPtr& e, bool canonical);
VarSet est_variables(const EstPtr& e);

struct IdResult {
  std::optional<Estimand> estimand;
  /// Hedge description when not identifiable.
  std::string witness;

  bool identifiable() const { return estimand.has_value(); }
};

struct IdOptions {
  /// Prefer a parent or minimal back-door adjustment form when one is valid.
  bool prefer_adjustment = true;
  /// Prune conditioning sets by d-separation and sum out free-standing factors.
  bool simplify = true;
};

/// d-separation on the latent projection: bidirected edges act as hidden parents.
bool d_separated(const CausalGraph& g, const VarSet& a, const VarSet& b, const VarSet& z);

/// Components of the bidirected part; ordered by first declared member.
std::vector<VarSet> c_components(const CausalGraph& g);

/// P(outcome | do(targets)). The empty target set yields the marginal of the
/// full joint, whose variables are all of V.
IdResult identify(const CausalGraph& g, const VarSet& targets, const std::string& outcome,
                  const IdOptions& opts = {});

/// Applies the pruning rules to any estimand tree.
EstPtr simplify_estimand(const EstPtr& e, const CausalGraph& g);

/// Variables of the estimand. Throws std::invalid_argument when not identifiable.
VarSet minimal_observation_set(const IdResult& r);

/// Subsets X of `manipulative` with X inside An(Y) of the graph mutilated at X.
Family enumerate_mis(const CausalGraph& g, const std::string& outcome, const VarSet& manipulative);

/// Possibly-optimal minimal intervention sets via minimal unobserved-confounder
/// territories and interventional borders; sets are projected onto `manipulative`.
Family enumerate_pomis(const CausalGraph& g, const std::string& outcome, const VarSet& manipulative);

}  // namespace osco
