#pragma once

#include <algorithm>
#include <cstddef>

#include "osco/graph.hpp"

namespace osco {

/// Per-variable linear costs c(L, o) = |L| * observe_per_var and
/// c(L, i) = |L| * intervene_per_var, with |L| floored at 1.
struct CostModel {
  double observe_per_var = 0.25;
  double intervene_per_var = 16.0;
  double budget = 300.0;

  double observe_cost(const VarSet& vars) const { return size_of(vars) * observe_per_var; }
  double intervene_cost(const VarSet& vars) const { return size_of(vars) * intervene_per_var; }

 private:
  static double size_of(const VarSet& vars) { return static_cast<double>(std::max<std::size_t>(vars.size(), 1)); }
};

}  // namespace osco
