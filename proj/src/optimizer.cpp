#include "osco/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "osco/ini.hpp"

namespace osco {

// ---------------------------------------------------------------------------
// Policies

std::string TradeoffPolicy::name() const {
  switch (kind) {
    case PolicyKind::Osco:
      return "osco";
    case PolicyKind::EpsilonGreedy:
      return "epsilon_greedy";
    case PolicyKind::AlwaysObserve:
      return "observe";
    case PolicyKind::AlwaysIntervene:
      return "intervene";
    case PolicyKind::Random:
      return "random(" + format_double(p) + ")";
  }
  return "?";
}

TradeoffPolicy TradeoffPolicy::parse(const std::string& text) {
  const std::string t = trim(text);
  TradeoffPolicy pol;
  if (t == "osco") return pol;
  if (t == "epsilon_greedy") return {PolicyKind::EpsilonGreedy, 0.5};
  if (t == "observe") return {PolicyKind::AlwaysObserve, 0.5};
  if (t == "intervene") return {PolicyKind::AlwaysIntervene, 0.5};
  if (t.rfind("random", 0) == 0) {
    pol.kind = PolicyKind::Random;
    std::string rest = trim(t.substr(6));
    if (rest.empty()) return pol;
    if (rest.front() != '(' || rest.back() != ')') throw std::invalid_argument("bad policy: " + text);
    rest = trim(rest.substr(1, rest.size() - 2));
    size_t used = 0;
    try {
      pol.p = std::stod(rest, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad random policy probability: " + text);
    }
    if (used != rest.size() || !(pol.p >= 0.0 && pol.p <= 1.0))
      throw std::invalid_argument("random policy probability must lie in [0, 1]: " + text);
    return pol;
  }
  throw std::invalid_argument("unknown policy: " + text);
}

double epsilon_schedule(const BaselineState& s) {
  const double coverage = static_cast<double>(s.n_observations) / s.full_coverage;
  return std::clamp(coverage / s.volume_ratio, 0.0, 1.0);
}

StopAction select_tradeoff_baseline(const TradeoffPolicy& policy, const BaselineState& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (policy.kind) {
    case PolicyKind::AlwaysObserve:
      return StopAction::Observe;
    case PolicyKind::AlwaysIntervene:
      return StopAction::Intervene;
    case PolicyKind::Random:
      return u(rng) < policy.p ? StopAction::Observe : StopAction::Intervene;
    case PolicyKind::EpsilonGreedy:
      return u(rng) < epsilon_schedule(s) ? StopAction::Observe : StopAction::Intervene;
    case PolicyKind::Osco:
      break;
  }
  throw std::invalid_argument("osco is not a baseline policy");
}

int Trace::count(const std::string& kind) const {
  return static_cast<int>(std::count_if(steps.begin(), steps.end(), [&](const TraceStep& s) { return s.stage_kind == kind; }));
}

// ---------------------------------------------------------------------------
// Ground truth

double true_objective(const ScmSpec& spec, const Intervention& iv, int n_mc) {
  const bool bernoulli = std::all_of(spec.noise.begin(), spec.noise.end(),
                                     [](const auto& kv) { return kv.second.kind == Noise::Kind::Bernoulli; });
  if (bernoulli && spec.noise.size() <= 24) return exact_discrete_mean(spec, iv);
  return mc_ground_truth(spec, iv, n_mc).mean;
}

namespace {

std::vector<std::vector<double>> regular_grid(const std::vector<Domain>& domains, int per_dim) {
  std::vector<std::vector<double>> out{{}};
  for (const auto& d : domains) {
    std::vector<double> axis = d.levels;
    if (!d.finite) {
      axis.resize(per_dim);
      for (int i = 0; i < per_dim; ++i) axis[i] = d.lo + d.width() * i / (per_dim - 1);
    }
    std::vector<std::vector<double>> next;
    for (const auto& p : out)
      for (double v : axis) {
        next.push_back(p);
        next.back().push_back(v);
      }
    out.swap(next);
  }
  return out;
}

}  // namespace

Optimum grid_optimum(const ScmSpec& spec, int points_per_dim, int grid_mc, int refine_mc, bool maximize) {
  const double dir = maximize ? -1.0 : 1.0;
  std::vector<std::pair<double, Intervention>> scored;
  for (const auto& set : enumerate_pomis(spec.graph, spec.target, spec.manipulative)) {
    const std::vector<std::string> vars(set.begin(), set.end());
    std::vector<Domain> doms;
    for (const auto& v : vars) doms.push_back(spec.domains.at(v));
    const int per_dim = vars.size() <= 1 ? points_per_dim : std::max(11, points_per_dim / 5);
    for (const auto& x : regular_grid(doms, per_dim)) {
      const Intervention iv(vars, x);
      scored.emplace_back(dir * true_objective(spec, iv, grid_mc), iv);
    }
  }
  if (scored.empty()) throw std::invalid_argument("no intervention sets to search");
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  Optimum best;
  double best_value = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < std::min<size_t>(5, scored.size()); ++i) {
    const double v = dir * true_objective(spec, scored[i].second, refine_mc);
    if (v < best_value) {
      best_value = v;
      best.iv = scored[i].second;
    }
  }
  best.value = dir * best_value;
  return best;
}

// ---------------------------------------------------------------------------
// Regret

std::vector<RegretPoint> simple_regret(const Trace& trace, double optimum, bool maximize) {
  if (trace.steps.empty()) throw std::invalid_argument("empty trace");
  std::vector<RegretPoint> out;
  const double dir = maximize ? -1.0 : 1.0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : trace.steps) {
    if (s.stage_kind == "intervene" && std::isfinite(s.true_mu)) best = std::min(best, dir * s.true_mu);
    out.push_back({s.cum_cost, std::isfinite(best) ? best - dir * optimum : std::numeric_limits<double>::infinity()});
  }
  return out;
}

double cost_to_regret(const std::vector<RegretPoint>& curve, double eps) {
  for (const auto& p : curve)
    if (p.regret <= eps) return p.cum_cost;
  return std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Shared loop state

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct SetInfo {
  VarSet set;
  std::vector<std::string> vars;
  std::vector<Domain> domains;
  std::optional<Estimand> estimand;
  VarSet mos;
  std::vector<std::string> mos_order;
  // Interventional evaluations on the minimisation scale.
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
};

// Below this many MOS rows the regression variances are too noisy to trust.
constexpr int kGainRetuneRows = 10;

struct ObservationState {
  GainTracker gain;
  VolumeBox box;
};

class LoopState {
 public:
  LoopState(const ScmSpec& spec, const RunConfig& cfg) : spec_(spec), cfg_(cfg), dir_(cfg.maximize ? -1.0 : 1.0) {
    if (!validate(spec).ok()) throw std::invalid_argument("invalid SCM: " + validate(spec).issues.front());
    for (const auto& set : enumerate_pomis(spec.graph, spec.target, spec.manipulative)) {
      SetInfo info;
      info.set = set;
      info.vars.assign(set.begin(), set.end());
      for (const auto& v : info.vars) info.domains.push_back(spec.domains.at(v));
      const IdResult id = identify(spec.graph, set, spec.target);
      info.estimand = id.estimand;
      info.mos = id.identifiable() ? minimal_observation_set(id) : spec.graph.node_set();
      info.mos_order.assign(info.mos.begin(), info.mos.end());
      if (!obs_.count(info.mos)) {
        std::vector<Domain> doms;
        for (const auto& v : info.mos_order) doms.push_back(spec.domains.at(v));
        obs_.emplace(info.mos, ObservationState{GainTracker(cfg.kernel), VolumeBox(doms)});
      }
      sets_.push_back(std::move(info));
    }
    if (sets_.empty()) throw std::invalid_argument("no POMIS to optimise over");
  }

  const ScmSpec& spec() const { return spec_; }
  double dir() const { return dir_; }
  Dataset& data() { return data_; }
  std::vector<SetInfo>& sets() { return sets_; }
  ObservationState& obs(const VarSet& mos) { return obs_.at(mos); }

  SetInfo& set_of(const Intervention& iv) {
    const VarSet s = iv.target_set();
    for (auto& info : sets_)
      if (info.set == s) return info;
    throw std::logic_error("intervention outside the POMIS family");
  }

  void refit() {
    fitted_.reset();
    if (data_.n_observations > 0) fitted_.emplace(spec_, data_, cfg_.fit);
    if (fitted_) retune_gain();
  }
  const FittedScm* fitted() const { return fitted_ ? &*fitted_ : nullptr; }

  void load(const Dataset& d) {
    for (SampleRow row : d.rows) {
      row.cost = 0.0;
      if (row.kind == RowKind::Observational) {
        add_observation(std::move(row));
        continue;
      }
      for (auto& info : sets_) {
        if (info.set != row.iv.target_set() || !row.has(spec_.target)) continue;
        std::vector<double> x;
        for (const auto& v : info.vars) x.push_back(row.iv.value_of(v));
        info.xs.push_back(std::move(x));
        info.ys.push_back(dir_ * row.at(spec_.target));
      }
      data_.add(std::move(row));
    }
  }

  void add_observation(SampleRow row) {
    for (auto& [mos, st] : obs_) {
      if (!row.has_all(mos)) continue;
      std::vector<double> v;
      for (const auto& c : mos) v.push_back(row.at(c));
      st.gain.add(v);
      st.box.add(v);
    }
    data_.add(std::move(row));
  }

 private:
  // Gain kernel variances follow the fitted regression of the target on the
  // other MOS columns; rebuilt only when the signal-to-noise ratio moves.
  void retune_gain() {
    for (auto& [mos, o] : obs_) {
      if (o.gain.size() < kGainRetuneRows || !mos.count(spec_.target)) continue;
      std::vector<std::string> inputs;
      for (const auto& v : mos)
        if (v != spec_.target) inputs.push_back(v);
      KernelParams h = o.gain.hyper();
      try {
        const auto m = fitted_->conditional({spec_.target}, inputs);
        h.noise_variance = std::max(m->noise_variance(), cfg_.kernel.noise_variance);
        h.signal_variance = std::max(m->signal_variance(), 1e-6);
      } catch (const std::runtime_error&) {
        continue;
      }
      const KernelParams& old = o.gain.hyper();
      const double ratio = (h.signal_variance / h.noise_variance) / (old.signal_variance / old.noise_variance);
      if (std::abs(std::log(ratio)) > 0.1) o.gain = o.gain.with_hyper(h);
    }
  }

  const ScmSpec& spec_;
  const RunConfig& cfg_;
  double dir_;
  Dataset data_;
  std::vector<SetInfo> sets_;
  std::map<VarSet, ObservationState> obs_;
  std::optional<FittedScm> fitted_;
};

StoppingContext make_context(LoopState& st, SetInfo& info, const Intervention& candidate, const EffectEstimator* est,
                             double mu_hat, const RunConfig& cfg, int stage_step) {
  const Dataset& d = st.data();
  ObservationState& o = st.obs(info.mos);
  StoppingContext ctx;
  ctx.candidate = candidate;
  ctx.estimand = info.estimand ? &*info.estimand : nullptr;
  ctx.estimator = est;
  ctx.fitted = st.fitted();
  ctx.mos = info.mos_order;
  ctx.gain = &o.gain;
  ctx.box = o.box;
  ctx.mu_hat = mu_hat;
  ctx.direction = st.dir();
  ctx.weights = cfg.weights;
  ctx.observe_cost = cfg.costs.observe_cost(info.mos);
  ctx.intervene_cost = cfg.costs.intervene_cost(info.set);
  ctx.remaining = cfg.costs.budget - d.cumulative_cost;
  ctx.step = stage_step;
  ctx.horizon = stage_step - 1 + stage_horizon(ctx.remaining, ctx.observe_cost, ctx.intervene_cost);
  return ctx;
}

/// Chooses the action and reports whether the run must stop instead.
struct Choice {
  bool stop = false;
  StopAction action = StopAction::Intervene;
  StoppingDecision decision;
  bool has_decision = false;
};

Choice choose(const TradeoffPolicy& policy, LoopState& st, SetInfo& info, const Intervention& candidate,
              double mu_hat, const RunConfig& cfg, int stage_step, std::uint64_t seed, int t, std::mt19937_64& rng) {
  Choice c;
  const double remaining = cfg.costs.budget - st.data().cumulative_cost;
  const bool can_int = cfg.costs.intervene_cost(info.set) < remaining;
  const bool can_obs = cfg.costs.observe_cost(info.mos) < remaining;
  if (policy.kind == PolicyKind::Osco) {
    // Observing only pays off if a later intervention is still affordable.
    if (!can_int) {
      c.stop = true;
      return c;
    }
    std::optional<EffectEstimator> est;
    if (info.estimand && st.fitted()) {
      try {
        est.emplace(*info.estimand, *st.fitted(), EstimatorOptions{cfg.prior_mc, mix_seed(seed, 7001)});
      } catch (const std::exception&) {
        est.reset();
      }
    }
    const StoppingContext ctx = make_context(st, info, candidate, est ? &*est : nullptr, mu_hat, cfg, stage_step);
    c.decision = decide(ctx, cfg.n_mc, mix_seed(seed, 50000 + static_cast<std::uint64_t>(t)));
    c.has_decision = true;
    c.action = c.decision.action;
    if (c.action == StopAction::Observe && !can_obs) c.action = StopAction::Intervene;
    return c;
  }
  BaselineState bs;
  bs.n_observations = st.data().n_observations;
  bs.volume_ratio = st.obs(info.mos).box.ratio();
  bs.full_coverage = cfg.epsilon_full_coverage;
  c.action = select_tradeoff_baseline(policy, bs, rng);
  if (policy.kind == PolicyKind::AlwaysObserve) {
    c.stop = !can_obs;
    return c;
  }
  // Same rule as above: no affordable intervention ends the run.
  if (!can_int) {
    c.stop = true;
    return c;
  }
  if (c.action == StopAction::Observe && !can_obs) c.action = StopAction::Intervene;
  return c;
}

void record_decision(TraceStep& s, const Choice& c) {
  if (!c.has_decision) return;
  s.reward_now = c.decision.reward_now;
  s.expected_next = c.decision.expected_next;
  s.mc_std = c.decision.mc_std;
  s.note = c.decision.note;
}

/// Executes the chosen action; returns the sampled target for interventions.
double execute(LoopState& st, SetInfo& info, const Intervention& iv, StopAction action, const RunConfig& cfg,
               std::uint64_t seed, int t, TraceStep& s) {
  if (action == StopAction::Observe) {
    SampleRow row = sample_observational(st.spec(), info.mos, 1, mix_seed(seed, 2 * static_cast<std::uint64_t>(t) + 1)).front();
    row.cost = cfg.costs.observe_cost(info.mos);
    row.step = t;
    s.stage_kind = "observe";
    s.cost = row.cost;
    st.add_observation(std::move(row));
    return std::numeric_limits<double>::quiet_NaN();
  }
  SampleRow row = sample_interventional(st.spec(), iv, 1, mix_seed(seed, 2 * static_cast<std::uint64_t>(t) + 2)).front();
  row.cost = cfg.costs.intervene_cost(info.set);
  row.step = t;
  s.stage_kind = "intervene";
  s.cost = row.cost;
  const double y = row.at(st.spec().target);
  st.data().add(std::move(row));
  return y;
}

void finish(Trace& trace, const Dataset& d, const RunConfig& cfg) {
  TraceStep stop;
  stop.step = trace.steps.empty() ? 1 : trace.steps.back().step + 1;
  stop.stage_kind = "stop";
  if (trace.best) stop.iv = *trace.best;
  stop.cum_cost = d.cumulative_cost;
  stop.best_mu_hat = trace.best_mu_hat;
  stop.budget_remaining = cfg.costs.budget - d.cumulative_cost;
  if (!trace.complete) stop.note = trace.error;
  trace.steps.push_back(std::move(stop));
}

}  // namespace

// ---------------------------------------------------------------------------
// CBO

namespace {

SurrogateBank build_bank(LoopState& st, const RunConfig& cfg, std::uint64_t seed) {
  SurrogateBank bank;
  PriorOptions po;
  po.points_per_dim = cfg.prior_points_per_dim;
  po.estimator = {cfg.prior_mc, mix_seed(seed, 7001)};
  const double dir = st.dir();
  for (auto& info : st.sets()) {
    CausalPrior prior = build_causal_prior(info.estimand ? &*info.estimand : nullptr, st.fitted(), info.vars,
                                           info.domains, po);
    ScalarFn mean = prior.mean_fn();
    if (dir < 0) mean = [m = std::move(mean)](std::span<const double> x) { return -m(x); };
    GpModel model(static_cast<int>(info.vars.size()), cfg.kernel, mean, prior.std_fn());
    if (!info.xs.empty()) model = fit_gp(info.xs, info.ys, mean, prior.std_fn(), cfg.kernel);
    bank.emplace(info.set, ArmSurrogate{info.set, info.vars, info.domains, std::move(prior), std::move(model)});
  }
  return bank;
}

/// Best surrogate mean over evaluated points; `where` receives the argmin.
double incumbent(LoopState& st, const SurrogateBank& bank, std::optional<Intervention>* where = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  for (auto& info : st.sets()) {
    const auto& model = bank.at(info.set).model;
    for (const auto& x : info.xs) {
      const double m = model.posterior(x).mean;
      if (m < best) {
        best = m;
        if (where) *where = Intervention(info.vars, x);
      }
    }
  }
  if (std::isfinite(best)) return best;
  for (const auto& [set, arm] : bank) {
    if (!arm.prior.available()) continue;
    for (double m : arm.prior.grid_means()) best = std::min(best, st.dir() * m);
  }
  return std::isfinite(best) ? best : 0.0;
}

}  // namespace

Trace run_cbo(const ScmSpec& spec, const TradeoffPolicy& policy, std::uint64_t seed, const RunConfig& cfg) {
  Trace trace;
  trace.scm = spec.name;
  trace.loop = "cbo";
  trace.policy = policy;
  trace.seed = seed;
  LoopState st(spec, cfg);
  if (cfg.warm_start) st.load(*cfg.warm_start);
  std::mt19937_64 rng(mix_seed(seed, 31));
  const auto cost_fn = [&](const VarSet& s) { return cfg.costs.intervene_cost(s); };
  int stage_step = 1;
  try {
    for (int t = 1; t <= cfg.max_steps; ++t) {
      const auto t0 = Clock::now();
      st.refit();
      const SurrogateBank bank = build_bank(st, cfg, seed);
      const double inc = incumbent(st, bank);
      AcquisitionOptions ao{cfg.xi, cfg.n_candidates, mix_seed(seed, 90000 + static_cast<std::uint64_t>(t))};
      const Acquisition acq = causal_expected_improvement(bank, cost_fn, inc, ao);
      SetInfo& info = st.set_of(acq.iv);
      const double mu_hat = bank.at(info.set).model.posterior(acq.iv.values).mean;

      const Choice c = choose(policy, st, info, acq.iv, mu_hat, cfg, stage_step, seed, t, rng);
      if (c.stop) break;
      TraceStep s;
      s.step = t;
      s.iv = acq.iv;
      s.best_mu_hat = st.dir() * inc;
      record_decision(s, c);
      const double y = execute(st, info, acq.iv, c.action, cfg, seed, t, s);
      if (c.action == StopAction::Intervene) {
        info.xs.push_back(acq.iv.values);
        info.ys.push_back(st.dir() * y);
        stage_step = 1;
      } else {
        ++stage_step;
      }
      s.wall_ms = elapsed_ms(t0);
      if (c.action == StopAction::Intervene) s.true_mu = true_objective(spec, acq.iv, cfg.truth_mc);
      s.cum_cost = st.data().cumulative_cost;
      s.budget_remaining = cfg.costs.budget - s.cum_cost;
      trace.steps.push_back(std::move(s));
    }
    st.refit();
    const SurrogateBank bank = build_bank(st, cfg, seed);
    std::optional<Intervention> best;
    const double v = incumbent(st, bank, &best);
    if (best) {
      trace.best = best;
      trace.best_mu_hat = st.dir() * v;
    }
  } catch (const std::exception& e) {
    trace.complete = false;
    trace.error = e.what();
  }
  finish(trace, st.data(), cfg);
  return trace;
}

// ---------------------------------------------------------------------------
// Causal UCB

namespace {

struct Arm {
  size_t set_index;
  std::vector<double> values;
  int pulls = 0;
  double sum = 0.0;  // minimisation scale
  double plug_mean = 0.0;
  double pseudo = 0.0;
};

double bernoulli_kl(double p, double q) {
  auto term = [](double a, double b) { return a > 0.0 ? a * std::log(a / b) : 0.0; };
  return term(p, q) + term(1.0 - p, 1.0 - q);
}

// Smallest q <= p with weight * KL(p, q) <= log_n, for p in [0, 1].
double kl_lower_bound(double p, double weight, double log_n) {
  double lo = 0.0, hi = p;
  if (weight * bernoulli_kl(p, 0.0) <= log_n) return 0.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (weight * bernoulli_kl(p, mid) > log_n ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace

Trace run_cucb(const ScmSpec& spec, const TradeoffPolicy& policy, std::uint64_t seed, const RunConfig& cfg) {
  if (!spec.all_finite()) throw std::invalid_argument("causal UCB needs finite domains for every variable");
  Trace trace;
  trace.scm = spec.name;
  trace.loop = "cucb";
  trace.policy = policy;
  trace.seed = seed;
  LoopState st(spec, cfg);
  if (cfg.warm_start) st.load(*cfg.warm_start);
  std::mt19937_64 rng(mix_seed(seed, 31));
  std::vector<Arm> arms;
  for (size_t i = 0; i < st.sets().size(); ++i)
    for (const auto& x : candidate_points(st.sets()[i].domains, 0, 0)) arms.push_back(Arm{i, x});
  const double dir = st.dir();
  // Target range on the minimisation scale; the index works on [0, 1].
  const auto& levels = spec.domains.at(spec.target).levels;
  const auto [lv_lo, lv_hi] = std::minmax_element(levels.begin(), levels.end());
  const double y_lo = std::min(dir * *lv_lo, dir * *lv_hi);
  const double y_hi = std::max(dir * *lv_lo, dir * *lv_hi);
  if (!(y_hi > y_lo)) throw std::invalid_argument("causal UCB needs at least two target levels");

  auto arm_mean = [](const Arm& a) {
    const double n = a.pulls + a.pseudo;
    return n > 0 ? (a.sum + a.pseudo * a.plug_mean) / n : std::numeric_limits<double>::quiet_NaN();
  };

  int stage_step = 1;
  try {
    for (int t = 1; t <= cfg.max_steps; ++t) {
      const auto t0 = Clock::now();
      st.refit();
      // Plug-in estimates act as pseudo-pulls weighted by their precision.
      for (size_t i = 0; i < st.sets().size(); ++i) {
        const SetInfo& info = st.sets()[i];
        std::optional<EffectEstimator> est;
        if (info.estimand && st.fitted()) est.emplace(*info.estimand, *st.fitted(), EstimatorOptions{cfg.prior_mc, 0});
        for (auto& a : arms) {
          if (a.set_index != i) continue;
          a.pseudo = 0.0;
          if (!est) continue;
          const EffectEstimate e = (*est)(Intervention(info.vars, a.values));
          if (e.flagged || !(e.std > 0.0)) continue;
          const double p = std::clamp(e.mean, 0.0, 1.0);
          a.plug_mean = dir * e.mean;
          a.pseudo = std::max(p * (1.0 - p), 1e-3) / (e.std * e.std);
        }
      }
      const double log_n = std::log(std::max(2, t));
      size_t pick = 0;
      double best_index = std::numeric_limits<double>::infinity();
      double inc = std::numeric_limits<double>::infinity();
      for (size_t k = 0; k < arms.size(); ++k) {
        const Arm& a = arms[k];
        const double weight = a.pulls + a.pseudo;
        const double unit = std::clamp((arm_mean(a) - y_lo) / (y_hi - y_lo), 0.0, 1.0);
        const double index = weight > 0 ? kl_lower_bound(unit, weight, log_n)
                                        : -std::numeric_limits<double>::infinity();
        if (index < best_index) {
          best_index = index;
          pick = k;
        }
        if (a.pulls > 0) inc = std::min(inc, arm_mean(a));
      }
      Arm& arm = arms[pick];
      SetInfo& info = st.sets()[arm.set_index];
      const Intervention iv(info.vars, arm.values);
      const double mu_hat = arm.pulls + arm.pseudo > 0 ? arm_mean(arm) : 0.0;

      const Choice c = choose(policy, st, info, iv, mu_hat, cfg, stage_step, seed, t, rng);
      if (c.stop) break;
      TraceStep s;
      s.step = t;
      s.iv = iv;
      s.best_mu_hat = std::isfinite(inc) ? dir * inc : std::numeric_limits<double>::quiet_NaN();
      record_decision(s, c);
      const double y = execute(st, info, iv, c.action, cfg, seed, t, s);
      if (c.action == StopAction::Intervene) {
        ++arm.pulls;
        arm.sum += dir * y;
        stage_step = 1;
      } else {
        ++stage_step;
      }
      s.wall_ms = elapsed_ms(t0);
      if (c.action == StopAction::Intervene) s.true_mu = true_objective(spec, iv, cfg.truth_mc);
      s.cum_cost = st.data().cumulative_cost;
      s.budget_remaining = cfg.costs.budget - s.cum_cost;
      trace.steps.push_back(std::move(s));
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : arms)
      if (a.pulls > 0 && arm_mean(a) < best) {
        best = arm_mean(a);
        trace.best = Intervention(st.sets()[a.set_index].vars, a.values);
      }
    if (trace.best) trace.best_mu_hat = dir * best;
  } catch (const std::exception& e) {
    trace.complete = false;
    trace.error = e.what();
  }
  finish(trace, st.data(), cfg);
  return trace;
}

// ---------------------------------------------------------------------------
// Trace CSV

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

double parse_num(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

constexpr const char* kTraceHeader =
    "step,stage_kind,intervention_set,intervention_values,cost,cum_cost,best_mu_hat,true_mu_at_choice,wall_ms,"
    "action,reward_now,expected_next_minus_obs_cost,mc_std,budget_remaining,note";

Intervention parse_values(const std::string& text) {
  Intervention iv;
  if (text.empty()) return iv;
  for (const auto& part : split(text, ';')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("bad intervention values: " + text);
    iv.targets.push_back(trim(part.substr(0, eq)));
    iv.values.push_back(std::stod(part.substr(eq + 1)));
  }
  return iv;
}

}  // namespace

void write_trace_csv(std::ostream& os, const Trace& trace, bool with_timing) {
  os << "# osco-trace v1 scm=" << trace.scm << " loop=" << trace.loop << " policy=" << trace.policy.name()
     << " seed=" << trace.seed << " complete=" << (trace.complete ? 1 : 0) << "\n";
  os << kTraceHeader << "\n";
  for (const auto& s : trace.steps) {
    os << s.step << ',' << s.stage_kind << ',' << csv_field(s.iv.set_label()) << ',' << csv_field(s.iv.values_label())
       << ',' << num(s.cost) << ',' << num(s.cum_cost) << ',' << num(s.best_mu_hat) << ',' << num(s.true_mu) << ','
       << num(with_timing ? s.wall_ms : 0.0) << ',' << s.stage_kind << ',' << num(s.reward_now) << ','
       << num(s.expected_next) << ',' << num(s.mc_std) << ',' << num(s.budget_remaining) << ',' << csv_field(s.note)
       << "\n";
  }
}

Trace read_trace_csv(std::istream& is) {
  Trace trace;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# osco-trace v1", 0) != 0) throw std::invalid_argument("not a trace file");
  std::istringstream meta(line.substr(15));
  std::string kv;
  while (meta >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
    if (k == "scm") trace.scm = v;
    if (k == "loop") trace.loop = v;
    if (k == "policy") trace.policy = TradeoffPolicy::parse(v);
    if (k == "seed") trace.seed = std::stoull(v);
    if (k == "complete") trace.complete = v == "1";
  }
  if (!std::getline(is, line) || line != kTraceHeader) throw std::invalid_argument("unexpected trace header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != 15) throw std::invalid_argument("trace row has " + std::to_string(f.size()) + " fields");
    TraceStep s;
    s.step = std::stoi(f[0]);
    s.stage_kind = f[1];
    s.iv = parse_values(f[3]);
    s.cost = parse_num(f[4]);
    s.cum_cost = parse_num(f[5]);
    s.best_mu_hat = parse_num(f[6]);
    s.true_mu = parse_num(f[7]);
    s.wall_ms = parse_num(f[8]);
    s.reward_now = parse_num(f[10]);
    s.expected_next = parse_num(f[11]);
    s.mc_std = parse_num(f[12]);
    s.budget_remaining = parse_num(f[13]);
    s.note = f[14];
    trace.steps.push_back(std::move(s));
  }
  if (!trace.steps.empty() && trace.steps.back().stage_kind == "stop") {
    const auto& last = trace.steps.back();
    if (!last.iv.empty()) trace.best = last.iv;
    trace.best_mu_hat = last.best_mu_hat;
    if (!trace.complete) trace.error = last.note;
  }
  return trace;
}

}  // namespace osco
