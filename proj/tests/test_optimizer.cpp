#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "osco/optimizer.hpp"

using namespace osco;

namespace {

// X -> Y with X fixed to a single level.
const ScmSpec& single_arm() {
  static const ScmSpec spec = parse_scm(R"(
[nodes]
order = X, Y
[edges]
Y = X
[functions]
X = a
Y = xor(X, c)
[noise]
a = bernoulli(0.5)
c = bernoulli(0.3)
[domains]
X = {1}
Y = {0, 1}
[roles]
manipulative = X
non_manipulative = Y
target = Y
bound = 1
)",
                                        "single_arm");
  return spec;
}

// Y copies X exactly, so do(X=0) is the deterministic minimiser.
const ScmSpec& two_arms() {
  static const ScmSpec spec = parse_scm(R"(
[nodes]
order = X, Y
[edges]
Y = X
[functions]
X = a
Y = X
[noise]
a = bernoulli(0.5)
[domains]
X = {0, 1}
Y = {0, 1}
[roles]
manipulative = X
non_manipulative = Y
target = Y
bound = 1
)",
                                      "two_arms");
  return spec;
}

TraceStep step_at(double cum, double true_mu) {
  TraceStep s;
  s.stage_kind = std::isnan(true_mu) ? "observe" : "intervene";
  s.cum_cost = cum;
  s.true_mu = true_mu;
  return s;
}

std::string csv_of(const Trace& t) {
  std::ostringstream os;
  write_trace_csv(os, t);
  return os.str();
}

RunConfig small_budget(double k) {
  RunConfig cfg;
  cfg.costs.budget = k;
  cfg.truth_mc = 2000;
  return cfg;
}

}  // namespace

TEST_CASE("policy names round-trip") {
  for (const char* name : {"osco", "epsilon_greedy", "observe", "intervene", "random(0.3)"}) {
    CHECK(TradeoffPolicy::parse(name).name() == name);
  }
  CHECK(TradeoffPolicy::parse("random(0.3)").p == doctest::Approx(0.3));
  CHECK_THROWS_AS(TradeoffPolicy::parse("greedy"), std::invalid_argument);
  CHECK_THROWS_AS(TradeoffPolicy::parse("random(1.5)"), std::invalid_argument);
  CHECK_THROWS_AS(TradeoffPolicy::parse("random(x)"), std::invalid_argument);
}

TEST_CASE("random(0.5) observes half the time") {
  std::mt19937_64 rng(11);
  const TradeoffPolicy half{PolicyKind::Random, 0.5};
  int obs = 0;
  for (int i = 0; i < 10000; ++i) obs += select_tradeoff_baseline(half, {}, rng) == StopAction::Observe;
  CHECK(std::abs(obs / 10000.0 - 0.5) <= 0.02);

  const TradeoffPolicy always{PolicyKind::Random, 1.0};
  for (int i = 0; i < 1000; ++i) REQUIRE(select_tradeoff_baseline(always, {}, rng) == StopAction::Observe);
  const TradeoffPolicy never{PolicyKind::Random, 0.0};
  for (int i = 0; i < 1000; ++i) REQUIRE(select_tradeoff_baseline(never, {}, rng) == StopAction::Intervene);
}

TEST_CASE("fixed baselines ignore the state") {
  std::mt19937_64 rng(3);
  BaselineState s;
  s.n_observations = 40;
  s.volume_ratio = 1.5;
  CHECK(select_tradeoff_baseline({PolicyKind::AlwaysObserve}, s, rng) == StopAction::Observe);
  CHECK(select_tradeoff_baseline({PolicyKind::AlwaysIntervene}, s, rng) == StopAction::Intervene);
  CHECK_THROWS_AS(select_tradeoff_baseline({PolicyKind::Osco}, s, rng), std::invalid_argument);
}

TEST_CASE("epsilon-greedy with no observations never observes") {
  BaselineState s;
  s.n_observations = 0;
  CHECK(epsilon_schedule(s) == doctest::Approx(0.0));
  std::mt19937_64 rng(5);
  int obs = 0;
  for (int i = 0; i < 2000; ++i)
    obs += select_tradeoff_baseline({PolicyKind::EpsilonGreedy}, s, rng) == StopAction::Observe;
  CHECK(obs == 0);
}

TEST_CASE("epsilon schedule stays in [0,1] and grows with coverage") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> count(0, 300);
  std::uniform_real_distribution<double> ratio(1.0, kVolumeRatioCap);
  for (int trial = 0; trial < 500; ++trial) {
    BaselineState a;
    a.n_observations = count(rng);
    a.volume_ratio = ratio(rng);
    BaselineState b = a;
    b.n_observations += count(rng);
    const double ea = epsilon_schedule(a), eb = epsilon_schedule(b);
    REQUIRE(ea >= 0.0);
    REQUIRE(eb <= 1.0);
    REQUIRE(eb >= ea);
  }
}

TEST_CASE("simple regret examples") {
  SUBCASE("optimum first gives a zero curve") {
    Trace t;
    t.steps = {step_at(16, -2.0), step_at(16.5, std::nan("")), step_at(32.5, -1.0), step_at(48.5, -2.0)};
    for (const auto& p : simple_regret(t, -2.0)) CHECK(p.regret == 0.0);
  }
  SUBCASE("chain Z=0 then Z=-3.2") {
    const ScmSpec& chain = builtin_benchmark("chain");
    const double opt = -2.17;
    Trace t;
    t.steps = {step_at(16, true_objective(chain, Intervention({"Z"}, {0.0}))),
               step_at(32, true_objective(chain, Intervention({"Z"}, {-3.2})))};
    const auto curve = simple_regret(t, opt);
    CHECK(curve[0].regret == doctest::Approx(2.17).epsilon(0.03));
    CHECK(std::abs(curve[1].regret) < 0.05);
    CHECK(curve[1].cum_cost == 32);
  }
  SUBCASE("regret is infinite before any intervention") {
    Trace t;
    t.steps = {step_at(0.5, std::nan("")), step_at(16.5, 1.0)};
    const auto curve = simple_regret(t, 0.0);
    CHECK(std::isinf(curve[0].regret));
    CHECK(curve[1].regret == 1.0);
  }
  SUBCASE("empty trace throws") { CHECK_THROWS_AS(simple_regret(Trace{}, 0.0), std::invalid_argument); }
}

TEST_CASE("simple regret never increases") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> value(0.0, 1.0);
  std::bernoulli_distribution observe(0.3);
  for (int trial = 0; trial < 200; ++trial) {
    Trace t;
    double cum = 0.0;
    for (int k = 0; k < 30; ++k) {
      cum += 1.0;
      t.steps.push_back(step_at(cum, observe(rng) ? std::nan("") : value(rng)));
    }
    const auto curve = simple_regret(t, -4.0);
    for (size_t k = 1; k < curve.size(); ++k) REQUIRE(curve[k].regret <= curve[k - 1].regret);
  }
}

TEST_CASE("cost to regret") {
  const std::vector<RegretPoint> curve{{1, INFINITY}, {17, 0.5}, {33, 0.08}, {49, 0.0}};
  CHECK(cost_to_regret(curve, 0.1) == 33);
  CHECK(cost_to_regret(curve, 0.0) == 49);
  CHECK(std::isinf(cost_to_regret({{1, 0.3}}, 0.1)));
}

TEST_CASE("true objective is exact for Bernoulli models") {
  // Y = X xor c with c ~ Bernoulli(0.3): E[Y | do(X=1)] = 0.7.
  CHECK(true_objective(single_arm(), Intervention({"X"}, {1.0})) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(true_objective(two_arms(), Intervention({"X"}, {0.0})) == 0.0);
}

TEST_CASE("always-observe never intervenes") {
  const Trace t = run_cbo(builtin_benchmark("chain"), {PolicyKind::AlwaysObserve}, 0, small_budget(20));
  CHECK(t.complete);
  CHECK(t.count("intervene") == 0);
  CHECK(t.count("observe") > 0);
  CHECK(std::isinf(simple_regret(t, -2.17).back().regret));
}

TEST_CASE("OSCO on chain: observation-heavy start, POMIS-only, budget-safe") {
  const ScmSpec& chain = builtin_benchmark("chain");
  const CostModel costs;
  for (std::uint64_t seed : {0, 1, 2}) {
    CAPTURE(seed);
    const Trace t = run_cbo(chain, {PolicyKind::Osco}, seed);
    REQUIRE(t.complete);
    for (int k = 0; k < 5; ++k) CHECK(t.steps[static_cast<size_t>(k)].stage_kind == "observe");
    const Family pomis = enumerate_pomis(chain.graph, chain.target, chain.manipulative);
    double total = 0.0;
    for (const auto& s : t.steps) {
      total += s.cost;
      if (s.stage_kind == "intervene") CHECK(pomis.count(s.iv.target_set()) == 1);
    }
    CHECK(total < costs.budget);
    CHECK(t.steps.back().cum_cost == doctest::Approx(total));
    CHECK(t.best.has_value());
  }
}

TEST_CASE("budget safety holds for every policy") {
  const ScmSpec& chain = builtin_benchmark("chain");
  const RunConfig cfg = small_budget(120);
  for (const char* name : {"intervene", "random(0.5)", "epsilon_greedy", "observe"}) {
    CAPTURE(name);
    const Trace t = run_cbo(chain, TradeoffPolicy::parse(name), 4, cfg);
    REQUIRE(t.complete);
    CHECK(t.steps.back().cum_cost < cfg.costs.budget);
  }
}

TEST_CASE("reruns give byte-identical traces") {
  const ScmSpec& chain = builtin_benchmark("chain");
  const RunConfig cfg = small_budget(100);
  CHECK(csv_of(run_cbo(chain, {PolicyKind::Osco}, 9, cfg)) == csv_of(run_cbo(chain, {PolicyKind::Osco}, 9, cfg)));
  const ScmSpec& mab = builtin_benchmark("synthetic_mab");
  CHECK(csv_of(run_cucb(mab, {PolicyKind::Osco}, 2)) == csv_of(run_cucb(mab, {PolicyKind::Osco}, 2)));
  CHECK(csv_of(run_cbo(chain, {PolicyKind::Osco}, 9, cfg)) != csv_of(run_cbo(chain, {PolicyKind::Osco}, 10, cfg)));
}

TEST_CASE("trace CSV round-trip") {
  const Trace t = run_cbo(builtin_benchmark("chain"), {PolicyKind::Osco}, 1, small_budget(100));
  const std::string text = csv_of(t);
  std::istringstream is(text);
  const Trace back = read_trace_csv(is);
  CHECK(back.scm == "chain");
  CHECK(back.loop == "cbo");
  CHECK(back.policy == t.policy);
  CHECK(back.seed == 1);
  CHECK(back.complete == t.complete);
  REQUIRE(back.steps.size() == t.steps.size());
  CHECK(csv_of(back) == text);
  CHECK(text.rfind("# osco-trace v1", 0) == 0);
  CHECK(text.find("\nstep,stage_kind,intervention_set,intervention_values,cost,cum_cost,best_mu_hat,"
                  "true_mu_at_choice,wall_ms,action,reward_now,expected_next_minus_obs_cost,mc_std,"
                  "budget_remaining,note\n") != std::string::npos);
}

TEST_CASE("causal UCB on a single arm always pulls it") {
  const Trace t = run_cucb(single_arm(), {PolicyKind::AlwaysIntervene}, 0, small_budget(100));
  REQUIRE(t.complete);
  CHECK(t.count("intervene") > 1);
  for (const auto& s : t.steps)
    if (s.stage_kind == "intervene") CHECK(s.iv.values_label() == "X=1");
}

TEST_CASE("causal UCB exploits the better deterministic arm") {
  for (std::uint64_t seed : {0, 1}) {
    const Trace t = run_cucb(two_arms(), {PolicyKind::AlwaysIntervene}, seed, small_budget(200));
    REQUIRE(t.complete);
    std::vector<std::string> pulled;
    for (const auto& s : t.steps)
      if (s.stage_kind == "intervene") pulled.push_back(s.iv.values_label());
    REQUIRE(pulled.size() > 3);
    CHECK(pulled[0] != pulled[1]);
    for (size_t k = 2; k < pulled.size(); ++k) CHECK(pulled[k] == "X=0");
    REQUIRE(t.best.has_value());
    CHECK(t.best->values_label() == "X=0");
  }
}

TEST_CASE("causal UCB rejects continuous models") {
  CHECK_THROWS_AS(run_cucb(builtin_benchmark("chain"), {PolicyKind::Osco}, 0), std::invalid_argument);
}

TEST_CASE("coarse grid optimum on chain") {
  const Optimum o = grid_optimum(builtin_benchmark("chain"), 126, 2000, 20000);
  CHECK(std::abs(o.iv.value_of("Z") + 3.2) < 0.25);
  CHECK(std::abs(o.value + 2.17) < 0.05);
}
