#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "osco/bench.hpp"

using namespace osco;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("osco_bench_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string f;
  while (std::getline(in, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Minimal CSV reader for the files written here (no quoted commas in tested columns).
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  const auto header = fields(line);
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = fields(line);
    std::map<std::string, std::string> row;
    for (size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(row);
  }
  return rows;
}

double as_num(const std::string& s) {
  if (s == "inf") return INFINITY;
  if (s == "nan") return NAN;
  return std::stod(s);
}

ExperimentConfig fast_chain(const fs::path& out) {
  ExperimentConfig c = parse_config(
      "[scm]\nname = chain\n"
      "[policy]\npolicies = osco, intervene\n"
      "[costs]\nbudget = 80\n"
      "[run]\nseeds = 0, 1, 2\ntruth_mc = 2000\noptimum_points = 51\noptimum_mc = 500\noptimum_refine_mc = 20000\n");
  c.output_dir = out.string();
  return c;
}

}  // namespace

TEST_CASE("a config naming only the SCM gets the default hyperparameters") {
  const ExperimentConfig c = parse_config("[scm]\nname = chain\n");
  REQUIRE(c.scms == std::vector<std::string>{"chain"});
  CHECK(c.run.costs.budget == 300);
  CHECK(c.run.costs.observe_cost({"Z", "Y"}) == 0.5);
  CHECK(c.run.costs.intervene_cost({"Z"}) == 16);
  CHECK(c.run.weights.eta == 2);
  CHECK(c.run.weights.kappa == 1);
  CHECK(c.run.weights.tau == 5);
  CHECK(c.run.weights.gamma == 1);
  CHECK(c.run.kernel.length_scale == 1);
  CHECK(c.run.kernel.noise_variance == doctest::Approx(std::exp(-5.0)).epsilon(1e-15));
  CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(c.obs_cost_grid.empty());
  CHECK(c.loop == LoopKind::Auto);
}

TEST_CASE("config keys are parsed into the run settings") {
  const ExperimentConfig c = parse_config(R"(
# ablation
[scm]
name = chain, psa
[policy]
policies = random(0.25), observe
loop = cbo
[costs]
budget = 120
intervene_per_var = 8
[stopping]
eta = 3
gamma = 0.9
n_mc = 4
[gp]
length_scale = 2
xi = 0
[run]
seeds = 7
workers = 2
maximize = true
)");
  CHECK(c.scms.size() == 2);
  CHECK(c.policies == std::vector<TradeoffPolicy>{{PolicyKind::Random, 0.25}, {PolicyKind::AlwaysObserve}});
  CHECK(c.loop == LoopKind::Cbo);
  CHECK(c.run.costs.budget == 120);
  CHECK(c.run.costs.intervene_per_var == 8);
  CHECK(c.run.weights.eta == 3);
  CHECK(c.run.weights.gamma == 0.9);
  CHECK(c.run.n_mc == 4);
  CHECK(c.run.kernel.length_scale == 2);
  CHECK(c.run.fit.length_scale == 2);
  CHECK(c.run.xi == 0);
  CHECK(c.seeds == std::vector<std::uint64_t>{7});
  CHECK(c.workers == 2);
  CHECK(c.run.maximize);
}

TEST_CASE("config errors carry line and column") {
  auto where = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ParseError& e) {
      return std::make_pair(e.line(), e.column());
    }
    return std::make_pair(-1, -1);
  };
  CHECK(where("[scm]\nname = chain\n[stopping]\n  epsilonn = 3\n") == std::make_pair(4, 3));
  CHECK(where("[scm]\nname = chain\n[bogus]\n") == std::make_pair(3, 1));
  CHECK(where("[scm]\nname = chain\n[costs]\nbudget = lots\n") == std::make_pair(4, 10));
  CHECK(where("[scm]\nname = chain\n[costs]\nbudget = -3\n") == std::make_pair(4, 10));
  CHECK(where("[scm]\nname = nowhere_scm\n") == std::make_pair(2, 8));
  CHECK(where("[scm]\nname = chain\n[policy]\npolicies = osco, greedy\n") == std::make_pair(4, 12));
  CHECK(where("[scm]\nname = chain\n[policy]\nloop = cucb\n") == std::make_pair(2, 8));
  CHECK(where("[run]\nseeds = 1\n") == std::make_pair(1, 1));
  CHECK(where("[scm]\nname = chain\n[run]\nseeds = 1.5\n") == std::make_pair(4, 9));
  CHECK(where("[scm]\nname = chain\n[stopping]\ngamma = 2\n") == std::make_pair(4, 9));
}

TEST_CASE("observation-cost grid expands into one matrix per cost") {
  const ExperimentConfig c = parse_config("[scm]\nname = chain\n[costs]\nobs_cost_grid = 0.0625, 0.25, 1\n");
  const auto m = expand_ablation(c);
  REQUIRE(m.size() == 3);
  CHECK(m[0].run.costs.observe_per_var == 0.0625);
  CHECK(m[1].run.costs.observe_per_var == 0.25);
  CHECK(m[2].run.costs.observe_per_var == 1.0);
  for (const auto& one : m) CHECK(one.obs_cost_grid.empty());
  CHECK(expand_ablation(parse_config("[scm]\nname = chain\n")).size() == 1);
}

TEST_CASE("output root comes from the environment for relative directories") {
  ExperimentConfig c;
  c.output_dir = "exp1";
  ::setenv(kOutputRootEnv, "/tmp/osco_root", 1);
  CHECK(resolve_output_dir(c) == fs::path("/tmp/osco_root/exp1"));
  c.output_dir = "/abs/dir";
  CHECK(resolve_output_dir(c) == fs::path("/abs/dir"));
  ::unsetenv(kOutputRootEnv);
  c.output_dir = "exp1";
  CHECK(resolve_output_dir(c) == fs::path("exp1"));
}

TEST_CASE("mean and sigma over sqrt(n)") {
  const MeanSem m = mean_sem({1, 2, 3, 4});
  CHECK(m.mean == 2.5);
  CHECK(m.sem == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0).epsilon(1e-15));
  CHECK(mean_sem({4.0}).sem == 0.0);
}

TEST_CASE("run matrix writes traces and an aggregate that the traces reproduce") {
  const fs::path out = scratch_dir("matrix");
  const ExperimentConfig cfg = fast_chain(out);
  const RunSummary s = run_experiment(cfg);
  REQUIRE(s.runs.size() == 6);
  CHECK(s.all_complete());
  int traces = 0;
  for (const auto& e : fs::directory_iterator(out / "traces")) traces += e.path().extension() == ".csv";
  CHECK(traces == 6);
  REQUIRE(fs::exists(out / "aggregate.csv"));
  REQUIRE(fs::exists(out / "runs.csv"));

  // Independent recomputation from the files alone.
  const auto runs = read_csv(out / "runs.csv");
  const auto agg = read_csv(out / "aggregate.csv");
  REQUIRE(agg.size() == 2);
  for (const auto& row : agg) {
    std::vector<double> regret, cost, obs, iv;
    for (const auto& r : runs) {
      if (r.at("policy") != row.at("policy")) continue;
      std::istringstream in(slurp(out / "traces" / r.at("trace")));
      const Trace t = read_trace_csv(in);
      const double opt = as_num(r.at("optimum"));
      double best = INFINITY, last_cost = 0.0;
      std::vector<std::pair<double, double>> curve;
      int n_obs = 0, n_iv = 0;
      for (const auto& st : t.steps) {
        if (st.stage_kind == "stop") continue;
        n_obs += st.stage_kind == "observe";
        n_iv += st.stage_kind == "intervene";
        if (st.stage_kind == "intervene") best = std::min(best, st.true_mu);
        curve.emplace_back(st.cum_cost, best - opt);
        last_cost = st.cum_cost;
      }
      double reach = INFINITY;
      for (const auto& [c, g] : curve)
        if (g <= cfg.regret_eps) {
          reach = c;
          break;
        }
      CHECK(last_cost < cfg.run.costs.budget);
      regret.push_back(curve.back().second);
      cost.push_back(reach);
      obs.push_back(n_obs);
      iv.push_back(n_iv);
    }
    auto check = [&](const std::vector<double>& xs, const std::string& col) {
      const double n = static_cast<double>(xs.size());
      double sum = 0.0;
      for (double x : xs) sum += x;
      const double mean = sum / n;
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      const double sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
      const double got_mean = as_num(row.at(col + "_mean")), got_sem = as_num(row.at(col + "_sem"));
      CAPTURE(col);
      if (std::isfinite(mean)) {
        CHECK(got_mean == mean);
        CHECK(got_sem == sem);
      } else {
        CHECK(std::isinf(got_mean));
      }
    };
    REQUIRE(regret.size() == 3);
    check(regret, "final_regret");
    check(cost, "cost_to_eps");
    check(obs, "n_observe");
    check(iv, "n_intervene");
  }
}

TEST_CASE("rerunning a config reproduces every trace byte for byte") {
  const fs::path a = scratch_dir("rerun_a"), b = scratch_dir("rerun_b");
  ExperimentConfig ca = fast_chain(a), cb = fast_chain(b);
  ca.seeds = cb.seeds = {4};
  ca.workers = 2;
  run_experiment(ca);
  run_experiment(cb);
  for (const auto& e : fs::directory_iterator(a / "traces")) {
    CAPTURE(e.path().filename().string());
    CHECK(slurp(e.path()) == slurp(b / "traces" / e.path().filename()));
  }
  CHECK(slurp(a / "aggregate.csv").substr(0, 200) == slurp(b / "aggregate.csv").substr(0, 200));
}

TEST_CASE("a failing run is recorded and the matrix continues") {
  ExperimentConfig c;
  c.scms = {"chain", "synthetic_mab"};
  c.loop = LoopKind::Cucb;
  c.policies = {{PolicyKind::AlwaysIntervene}};
  c.seeds = {0};
  c.run.truth_mc = 100;
  c.optimum_points = 51;
  c.optimum_mc = 200;
  c.optimum_refine_mc = 1000;
  c.output_dir = scratch_dir("failing").string();
  const RunSummary s = run_experiment(c);
  REQUIRE(s.runs.size() == 2);
  CHECK_FALSE(s.all_complete());
  CHECK_FALSE(s.runs[0].complete);
  CHECK(s.runs[0].error.find("finite") != std::string::npos);
  CHECK(s.runs[1].complete);
  CHECK(s.aggregate[0].n_failed == 1);
  const auto rows = read_csv(resolve_output_dir(c) / "runs.csv");
  CHECK(rows[0].at("complete") == "0");
  CHECK(rows[1].at("complete") == "1");
}

TEST_CASE("convergence series: band from seeds, undefined before intervening") {
  const std::vector<RegretPoint> a{{0.5, INFINITY}, {16.5, 2.0}, {32.5, 0.0}};
  const std::vector<RegretPoint> b{{16, 1.0}, {32, 1.0}};
  const auto one = convergence_series({a}, 40);
  REQUIRE(one.size() == 41);
  CHECK(std::isnan(one[10].mean));
  CHECK(one[17].mean == 2.0);
  CHECK(one[17].lower == one[17].upper);  // single seed: zero band
  CHECK(one[40].mean == 0.0);

  const auto two = convergence_series({a, b}, 40);
  CHECK(std::isnan(two[16].mean));
  CHECK(two[17].mean == 1.5);
  CHECK(two[17].upper - two[17].lower == doctest::Approx(2 * std::sqrt(0.5) / std::sqrt(2.0)));
  CHECK(two[33].mean == 0.5);
}

TEST_CASE("plot TSV headers are stable") {
  std::ostringstream conv, act, ovh;
  write_convergence_tsv(conv, {{"osco", {{0, 1, 0.5, 1.5}}}});
  CHECK(conv.str() == "policy\tcost\tregret_mean\tregret_lower\tregret_upper\nosco\t0\t1\t0.5\t1.5\n");
  Trace t;
  t.policy = {PolicyKind::Osco};
  t.seed = 2;
  TraceStep s1, s2, s3;
  s1.step = 1, s1.stage_kind = "observe", s1.cum_cost = 0.5;
  s2.step = 2, s2.stage_kind = "intervene", s2.cum_cost = 16.5;
  s3.step = 3, s3.stage_kind = "stop", s3.cum_cost = 16.5;
  t.steps = {s1, s2, s3};
  write_actions_tsv(act, {t});
  CHECK(act.str() ==
        "policy\tseed\tstep\tcum_cost\tn_observe\tn_intervene\n"
        "osco\t2\t1\t0.5\t1\t0\n"
        "osco\t2\t2\t16.5\t1\t1\n");
  OverheadResult r{{"intervene", 10, 1, 100}, {"osco", 15, 2, 100}, 1.5};
  write_overhead_tsv(ovh, r);
  CHECK(ovh.str() == "label\tmean_ms\tstd_ms\tn\tratio\nintervene\t10\t1\t100\t1\nosco\t15\t2\t100\t1.5\n");
}

TEST_CASE("plot data for a fixed-seed chain run") {
  const fs::path out = scratch_dir("plots");
  ExperimentConfig c = fast_chain(out);
  c.seeds = {0};
  const RunSummary s = run_experiment(c);
  std::map<std::string, Trace> traces;
  for (const auto& r : s.runs) {
    std::istringstream in(slurp(r.trace_path));
    traces[run_stem(r.scm, r.policy, r.obs_cost, r.seed)] = read_trace_csv(in);
  }
  const auto files = emit_plot_data(s, traces, out / "plots");
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "convergence_chain__c0.25.tsv");
  CHECK(files[1].filename() == "actions_chain__c0.25.tsv");
  std::istringstream conv(slurp(files[0]));
  std::string line;
  std::getline(conv, line);
  CHECK(line == "policy\tcost\tregret_mean\tregret_lower\tregret_upper");
  int rows = 0, zero_band = 0;
  while (std::getline(conv, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, '\t');
    REQUIRE(cells.size() == 5);
    ++rows;
    zero_band += cells[3] == cells[4];
  }
  CHECK(rows == 2 * 81);      // two policies, costs 0..80
  CHECK(zero_band == rows);   // one seed
}

TEST_CASE("overhead measurement guards and shape") {
  const ScmSpec& chain = builtin_benchmark("chain");
  CHECK_THROWS_AS(measure_overhead(chain, 1), std::invalid_argument);
  CHECK_THROWS_AS(measure_overhead(chain, 10, 0, {PolicyKind::Osco}), std::invalid_argument);
  const OverheadResult r = measure_overhead(chain, 10, 0, {PolicyKind::AlwaysIntervene}, {}, 30);
  CHECK(r.baseline.n == 10);
  CHECK(r.osco.n == 10);
  CHECK(r.baseline.label == "intervene");
  CHECK(r.osco.label == "osco");
  CHECK(r.baseline.std_ms >= 0.0);
  CHECK(r.ratio == doctest::Approx(r.osco.mean_ms / r.baseline.mean_ms));
}
