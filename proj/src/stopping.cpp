#include "osco/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace osco {

namespace {

double domain_width(const Domain& d) {
  if (!d.finite) return d.width();
  if (d.levels.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(d.levels.begin(), d.levels.end());
  return *hi - *lo;
}

}  // namespace

VolumeBox::VolumeBox(std::vector<Domain> domains)
    : domains_(std::move(domains)), lo_(domains_.size(), 0.0), hi_(domains_.size(), 0.0) {}

void VolumeBox::add(std::span<const double> row) {
  if (row.size() != domains_.size()) throw std::invalid_argument("volume box row has the wrong width");
  for (size_t i = 0; i < row.size(); ++i) {
    lo_[i] = n_ == 0 ? row[i] : std::min(lo_[i], row[i]);
    hi_[i] = n_ == 0 ? row[i] : std::max(hi_[i], row[i]);
  }
  ++n_;
}

VolumeBox VolumeBox::with(std::span<const double> row) const {
  VolumeBox b = *this;
  b.add(row);
  return b;
}

double VolumeBox::ratio() const {
  if (n_ < 2) return kVolumeRatioCap;
  double full = 1.0, seen = 1.0;
  for (size_t i = 0; i < domains_.size(); ++i) {
    const double w = domain_width(domains_[i]);
    if (w <= 0.0) continue;
    full *= w;
    seen *= hi_[i] - lo_[i];
  }
  if (seen <= 0.0) return kVolumeRatioCap;
  return std::min(full / seen, kVolumeRatioCap);
}

double volume_ratio(const std::vector<Domain>& domains, const std::vector<std::vector<double>>& rows) {
  VolumeBox b(domains);
  for (const auto& r : rows) b.add(r);
  return b.ratio();
}

int stage_horizon(double remaining, double observe_cost, double intervene_cost) {
  if (!(remaining > intervene_cost)) return 0;
  const double steps = std::ceil((remaining - intervene_cost) / observe_cost);
  if (!(steps < 1e9)) return 1000000000;
  return std::max(1, static_cast<int>(steps));
}

double stopping_reward(const StoppingContext& ctx, const RewardTerms& t, int step) {
  if (ctx.terminal) return 0.0;
  const StoppingWeights& w = ctx.weights;
  if (step >= ctx.horizon) return w.eta * t.gain;
  return w.eta * t.gain - w.kappa * t.mu_hat - w.tau * t.ratio - ctx.intervene_cost;
}

double stopping_reward(const StoppingContext& ctx) {
  RewardTerms t;
  t.gain = ctx.gain ? ctx.gain->gain() : 0.0;
  t.mu_hat = ctx.mu_hat;
  t.ratio = ctx.box.ratio();
  return stopping_reward(ctx, t, ctx.step);
}

StoppingDecision decide(const StoppingContext& ctx, int n_mc, std::uint64_t seed) {
  if (ctx.terminal) throw std::logic_error("no decision after the terminal state");
  if (n_mc < 1) throw std::invalid_argument("n_mc must be positive");
  StoppingDecision d;
  d.observe_cost = ctx.observe_cost;
  d.reward_now = stopping_reward(ctx);
  if (!ctx.estimand) {
    d.note = "not identifiable";
    return d;
  }
  if (!(ctx.remaining - ctx.observe_cost > ctx.intervene_cost) || ctx.step >= ctx.horizon) {
    d.forced = true;
    d.note = "observation would leave no budget to intervene";
    return d;
  }

  std::vector<double> next;
  const bool no_data = !ctx.estimator || !ctx.fitted || ctx.fitted->data().empty();
  if (no_data) {
    if (ctx.gain && ctx.gain->size() > 0) {
      d.flagged = true;
      d.note = "no estimator for the lookahead";
      return d;
    }
    // A first row's gain does not depend on its value, and one row leaves the box degenerate.
    RewardTerms t;
    t.gain = ctx.gain ? ctx.gain->gain_with(std::vector<double>(ctx.mos.size(), 0.0)) : 0.0;
    t.mu_hat = ctx.mu_hat;
    t.ratio = kVolumeRatioCap;
    next.push_back(ctx.weights.gamma * stopping_reward(ctx, t, ctx.step + 1));
  } else {
    const VarSet mos(ctx.mos.begin(), ctx.mos.end());
    double base = 0.0;
    try {
      base = (*ctx.estimator)(ctx.candidate).mean;
    } catch (const std::exception& e) {
      d.flagged = true;
      d.note = e.what();
      return d;
    }
    std::vector<double> row(ctx.mos.size());
    for (int j = 0; j < n_mc; ++j) {
      RewardTerms t;
      try {
        const SampleRow o = simulate_observation(*ctx.fitted, mos, mix_seed(seed, static_cast<std::uint64_t>(j)));
        for (size_t i = 0; i < row.size(); ++i) row[i] = o.at(ctx.mos[i]);
        t.gain = ctx.gain ? ctx.gain->gain_with(row) : 0.0;
        t.ratio = ctx.box.with(row).ratio();
        t.mu_hat = ctx.mu_hat + ctx.direction * (ctx.estimator->with_row(o)(ctx.candidate).mean - base);
      } catch (const std::exception& e) {
        d.flagged = true;
        d.note = std::string("simulation failed: ") + e.what();
        return d;
      }
      next.push_back(ctx.weights.gamma * stopping_reward(ctx, t, ctx.step + 1));
    }
  }
  double mean = 0.0;
  for (double v : next) mean += v;
  mean /= static_cast<double>(next.size());
  double ss = 0.0;
  for (double v : next) ss += (v - mean) * (v - mean);
  d.mc_std = next.size() > 1 ? std::sqrt(ss / static_cast<double>(next.size() - 1) / static_cast<double>(next.size())) : 0.0;
  d.expected_next = mean - ctx.observe_cost;
  d.action = d.reward_now >= d.expected_next - d.mc_std ? StopAction::Intervene : StopAction::Observe;
  return d;
}

// ---------------------------------------------------------------------------
// Finite instances

namespace {

void check_instance(const StoppingInstance& inst) {
  const size_t n = static_cast<size_t>(inst.n_states);
  if (inst.horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  if (inst.transition.size() != n || inst.reward.size() != n || inst.terminal_reward.size() != n)
    throw std::invalid_argument("stopping instance sizes disagree");
  if (inst.gamma < 0.0 || inst.gamma > 1.0) throw std::invalid_argument("gamma must lie in [0, 1]");
  for (const auto& row : inst.transition)
    if (row.size() != n) throw std::invalid_argument("transition matrix must be square");
}

double continuation(const StoppingInstance& inst, int s, const std::vector<double>& next) {
  double e = 0.0;
  for (int t = 0; t < inst.n_states; ++t) e += inst.transition[s][t] * next[t];
  return inst.gamma * e - inst.continuation_cost;
}

const std::vector<double>& reward_at(const StoppingInstance& inst, int k) {
  return k == inst.horizon ? inst.terminal_reward : inst.reward;
}

}  // namespace

std::vector<int> StoppingSolution::stopping_set(int remaining) const {
  const int k = static_cast<int>(stop.size()) - remaining;
  if (k < 1) throw std::out_of_range("remaining steps exceed the horizon");
  std::vector<int> out;
  for (size_t s = 0; s < stop[k - 1].size(); ++s)
    if (stop[k - 1][s]) out.push_back(static_cast<int>(s));
  return out;
}

std::vector<int> StoppingSolution::continuation_set(int remaining) const {
  const int k = static_cast<int>(stop.size()) - remaining;
  if (k < 1) throw std::out_of_range("remaining steps exceed the horizon");
  std::vector<int> out;
  for (size_t s = 0; s < stop[k - 1].size(); ++s)
    if (!stop[k - 1][s]) out.push_back(static_cast<int>(s));
  return out;
}

StoppingSolution backward_induction_oracle(const StoppingInstance& inst) {
  check_instance(inst);
  const int T = inst.horizon, n = inst.n_states;
  StoppingSolution sol;
  sol.value.assign(T, std::vector<double>(n));
  sol.stop.assign(T, std::vector<bool>(n, true));
  sol.value[T - 1] = inst.terminal_reward;
  for (int k = T - 1; k >= 1; --k)
    for (int s = 0; s < n; ++s) {
      const double cont = continuation(inst, s, sol.value[k]);
      const bool stop = inst.reward[s] >= cont;
      sol.stop[k - 1][s] = stop;
      sol.value[k - 1][s] = stop ? inst.reward[s] : cont;
    }
  return sol;
}

StoppingSolution one_step_lookahead(const StoppingInstance& inst) {
  check_instance(inst);
  const int T = inst.horizon, n = inst.n_states;
  StoppingSolution sol;
  sol.value.assign(T, std::vector<double>(n));
  sol.stop.assign(T, std::vector<bool>(n, true));
  sol.value[T - 1] = inst.terminal_reward;
  for (int k = T - 1; k >= 1; --k)
    for (int s = 0; s < n; ++s) {
      const bool stop = inst.reward[s] >= continuation(inst, s, reward_at(inst, k + 1));
      sol.stop[k - 1][s] = stop;
      sol.value[k - 1][s] = stop ? inst.reward[s] : continuation(inst, s, sol.value[k]);
    }
  return sol;
}

bool is_closed(const StoppingInstance& inst, const std::vector<int>& states) {
  std::vector<bool> in(inst.n_states, false);
  for (int s : states) in[s] = true;
  for (int s : states)
    for (int t = 0; t < inst.n_states; ++t)
      if (inst.transition[s][t] > 0.0 && !in[t]) return false;
  return true;
}

}  // namespace osco
