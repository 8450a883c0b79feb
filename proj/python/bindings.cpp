// Python bindings: benchmarks, identification, single runs, experiments and overhead.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "osco/bench.hpp"
#include "osco/identification.hpp"

namespace py = pybind11;
using namespace osco;

namespace {

VarSet to_set(const std::vector<std::string>& names) { return VarSet(names.begin(), names.end()); }

std::vector<std::vector<std::string>> to_lists(const Family& f) {
  std::vector<std::vector<std::string>> out;
  for (const auto& s : f) out.emplace_back(s.begin(), s.end());
  return out;
}

py::dict step_dict(const TraceStep& s) {
  py::dict d;
  d["step"] = s.step;
  d["stage_kind"] = s.stage_kind;
  d["targets"] = s.iv.targets;
  d["values"] = s.iv.values;
  d["cost"] = s.cost;
  d["cum_cost"] = s.cum_cost;
  d["best_mu_hat"] = s.best_mu_hat;
  d["true_mu"] = s.true_mu;
  d["wall_ms"] = s.wall_ms;
  d["reward_now"] = s.reward_now;
  d["expected_next"] = s.expected_next;
  d["budget_remaining"] = s.budget_remaining;
  return d;
}

py::dict trace_dict(const Trace& t) {
  py::dict d;
  d["scm"] = t.scm;
  d["loop"] = t.loop;
  d["policy"] = t.policy.name();
  d["seed"] = t.seed;
  d["complete"] = t.complete;
  d["error"] = t.error;
  py::list steps;
  for (const auto& s : t.steps) steps.append(step_dict(s));
  d["steps"] = steps;
  if (t.best) {
    d["best_targets"] = t.best->targets;
    d["best_values"] = t.best->values;
  }
  d["best_mu_hat"] = t.best_mu_hat;
  return d;
}

py::dict run_one(const std::string& scm, const std::string& policy, std::uint64_t seed, const std::string& loop,
                 double budget, double observe_per_var, int n_mc, int truth_mc) {
  const ScmSpec spec = resolve_scm(scm);
  RunConfig cfg;
  if (budget > 0) cfg.costs.budget = budget;
  if (observe_per_var >= 0) cfg.costs.observe_per_var = observe_per_var;
  cfg.n_mc = n_mc;
  cfg.truth_mc = truth_mc;
  const TradeoffPolicy p = TradeoffPolicy::parse(policy);
  const bool cucb = loop == "cucb" || (loop == "auto" && spec.all_finite());
  if (loop != "auto" && loop != "cbo" && loop != "cucb") throw std::invalid_argument("loop must be auto, cbo or cucb");
  Trace t;
  {
    py::gil_scoped_release release;
    t = cucb ? run_cucb(spec, p, seed, cfg) : run_cbo(spec, p, seed, cfg);
  }
  py::dict d = trace_dict(t);
  py::list regret;
  if (!t.steps.empty()) {
    const double opt = grid_optimum(spec, 101, 1000, 20000, cfg.maximize).value;
    for (const auto& r : simple_regret(t, opt, cfg.maximize)) regret.append(py::make_tuple(r.cum_cost, r.regret));
    d["optimum"] = opt;
  }
  d["regret"] = regret;
  return d;
}

py::dict record_dict(const RunRecord& r) {
  py::dict d;
  d["scm"] = r.scm;
  d["policy"] = r.policy.name();
  d["seed"] = r.seed;
  d["obs_cost"] = r.obs_cost;
  d["optimum"] = r.optimum;
  d["final_regret"] = r.final_regret;
  d["cost_to_eps"] = r.cost_to_eps;
  d["n_observe"] = r.n_observe;
  d["n_intervene"] = r.n_intervene;
  d["complete"] = r.complete;
  d["error"] = r.error;
  d["trace_path"] = r.trace_path.string();
  return d;
}

}  // namespace

PYBIND11_MODULE(_osco, m) {
  m.doc() = "Cost-aware causal optimisation with optimal stopping";

  m.def("benchmark_names", &benchmark_names);
  m.def(
      "identify",
      [](const std::string& scm, const std::vector<std::string>& targets, const std::string& outcome) -> py::object {
        const ScmSpec spec = resolve_scm(scm);
        const IdResult r = identify(spec.graph, to_set(targets), outcome.empty() ? spec.target : outcome);
        if (!r.identifiable()) return py::none();
        const VarSet mos = minimal_observation_set(r);
        return py::make_tuple(r.estimand->to_string(), std::vector<std::string>(mos.begin(), mos.end()));
      },
      py::arg("scm"), py::arg("targets"), py::arg("outcome") = "",
      "(estimand, MOS) for P(outcome | do(targets)), or None when not identifiable.");
  m.def(
      "pomis",
      [](const std::string& scm) {
        const ScmSpec spec = resolve_scm(scm);
        return to_lists(enumerate_pomis(spec.graph, spec.target, spec.manipulative));
      },
      py::arg("scm"));
  m.def(
      "mis",
      [](const std::string& scm) {
        const ScmSpec spec = resolve_scm(scm);
        return to_lists(enumerate_mis(spec.graph, spec.target, spec.manipulative));
      },
      py::arg("scm"));
  m.def(
      "true_objective",
      [](const std::string& scm, const std::vector<std::string>& targets, const std::vector<double>& values,
         int n_mc) { return true_objective(resolve_scm(scm), Intervention(targets, values), n_mc); },
      py::arg("scm"), py::arg("targets"), py::arg("values"), py::arg("n_mc") = 10000);
  m.def("run", &run_one, py::arg("scm"), py::arg("policy") = "osco", py::arg("seed") = 0, py::arg("loop") = "auto",
        py::arg("budget") = -1.0, py::arg("observe_per_var") = -1.0, py::arg("n_mc") = 10,
        py::arg("truth_mc") = 10000,
        "One optimisation run. Returns the trace as a dict with a 'regret' list of (cum_cost, regret).");
  m.def(
      "run_config",
      [](const std::string& path, int workers) {
        ExperimentConfig cfg = load_config(path);
        if (workers > 0) cfg.workers = workers;
        RunSummary s;
        {
          py::gil_scoped_release release;
          s = run_experiment(cfg);
        }
        py::list runs;
        for (const auto& r : s.runs) runs.append(record_dict(r));
        py::dict d;
        d["output_dir"] = resolve_output_dir(cfg).string();
        d["runs"] = runs;
        d["all_complete"] = s.all_complete();
        return d;
      },
      py::arg("path"), py::arg("workers") = 0);
  m.def(
      "measure_overhead",
      [](const std::string& scm, int n_iter, std::uint64_t seed, const std::string& baseline) {
        OverheadResult r;
        const ScmSpec spec = resolve_scm(scm);
        {
          py::gil_scoped_release release;
          r = measure_overhead(spec, n_iter, seed, TradeoffPolicy::parse(baseline));
        }
        py::dict d;
        d["baseline_ms"] = r.baseline.mean_ms;
        d["osco_ms"] = r.osco.mean_ms;
        d["ratio"] = r.ratio;
        return d;
      },
      py::arg("scm") = "chain", py::arg("n_iter") = 100, py::arg("seed") = 0, py::arg("baseline") = "intervene");

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
}
