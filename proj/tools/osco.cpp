// osco command line: experiments, identification queries and overhead timing.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "osco/bench.hpp"

using namespace osco;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kRunFailed = 1;
constexpr int kConfigError = 2;

ScmSpec load_scm_or_throw(const std::string& name) { return resolve_scm(name); }

VarSet parse_set(const std::string& text) {
  VarSet s;
  for (const auto& v : split(text, ',')) s.insert(v);
  return s;
}

std::string fmt(double v) {
  std::ostringstream os;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  os << std::setprecision(4) << v;
  return os.str();
}

int cmd_run(const std::string& path, int workers, bool plots) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(path);
  } catch (const std::exception& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return kConfigError;
  }
  if (workers > 0) cfg.workers = workers;
  const RunSummary s = run_experiment(cfg);
  const fs::path out = resolve_output_dir(cfg);

  std::cout << std::left << std::setw(16) << "scm" << std::setw(9) << "obs_cost" << std::setw(16) << "policy"
            << std::setw(26) << "final_regret" << std::setw(26) << "cost_to_eps" << std::setw(8) << "reached"
            << "failed\n";
  for (const auto& a : s.aggregate)
    std::cout << std::setw(16) << fs::path(a.scm).stem().string() << std::setw(9) << fmt(a.obs_cost) << std::setw(16)
              << a.policy.name() << std::setw(26) << (fmt(a.final_regret.mean) + " +- " + fmt(a.final_regret.sem))
              << std::setw(26) << (fmt(a.cost_to_eps.mean) + " +- " + fmt(a.cost_to_eps.sem)) << std::setw(8)
              << (std::to_string(a.n_reached) + "/" + std::to_string(a.n_seeds)) << a.n_failed << "\n";
  for (const auto& r : s.runs)
    if (!r.complete) std::cerr << "run " << r.trace_path.filename().string() << " failed: " << r.error << "\n";

  if (plots) {
    std::map<std::string, Trace> traces;
    for (const auto& r : s.runs) {
      std::ifstream in(r.trace_path);
      if (!in) continue;
      traces[run_stem(r.scm, r.policy, r.obs_cost, r.seed)] = read_trace_csv(in);
    }
    for (const auto& f : emit_plot_data(s, traces, out / "plots")) std::cout << "wrote " << f.string() << "\n";
  }
  std::cout << "results in " << out.string() << "\n";
  return s.all_complete() ? kOk : kRunFailed;
}

int cmd_identify(const std::string& scm, const std::string& targets, const std::string& outcome) {
  const ScmSpec spec = load_scm_or_throw(scm);
  const IdResult r = identify(spec.graph, parse_set(targets), outcome.empty() ? spec.target : outcome);
  if (!r.identifiable()) {
    std::cout << "not identifiable: " << r.witness << "\n";
    return kOk;
  }
  std::cout << r.estimand->to_string() << "\n";
  std::cout << "MOS: " << to_string(minimal_observation_set(r)) << "\n";
  return kOk;
}

int cmd_pomis(const std::string& scm, bool with_mis) {
  const ScmSpec spec = load_scm_or_throw(scm);
  const Family pomis = enumerate_pomis(spec.graph, spec.target, spec.manipulative);
  std::cout << "POMIS: " << to_string(pomis) << "\n";
  for (const auto& set : pomis) {
    const IdResult r = identify(spec.graph, set, spec.target);
    std::cout << "  " << to_string(set) << "  MOS "
              << (r.identifiable() ? to_string(minimal_observation_set(r)) : std::string("(not identifiable)"))
              << "\n";
  }
  if (with_mis) std::cout << "MIS: " << to_string(enumerate_mis(spec.graph, spec.target, spec.manipulative)) << "\n";
  return kOk;
}

int cmd_overhead(const std::string& scm, int iters, std::uint64_t seed, const std::string& baseline,
                 const std::string& out) {
  const ScmSpec spec = load_scm_or_throw(scm);
  const OverheadResult r = measure_overhead(spec, iters, seed, TradeoffPolicy::parse(baseline));
  if (out.empty()) {
    write_overhead_tsv(std::cout, r);
    return kOk;
  }
  ExperimentConfig where;
  where.output_dir = out;
  const fs::path path = resolve_output_dir(where);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  write_overhead_tsv(f, r);
  std::cout << "ratio " << fmt(r.ratio) << ", wrote " << path.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cost-aware causal optimisation experiments"};
  app.require_subcommand(1);

  std::string config;
  int workers = 0;
  bool plots = true;
  auto* run = app.add_subcommand("run", "Run the experiment matrix of a config file");
  run->add_option("config", config, "Config file")->required();
  run->add_option("--workers", workers, "Parallel runs (overrides [run] workers)");
  run->add_flag("!--no-plots", plots, "Skip plot TSVs");

  std::string scm, targets, outcome;
  auto* id = app.add_subcommand("identify", "Print the observational estimand of P(outcome | do(set))");
  id->add_option("scm", scm, "Builtin name or SCM file")->required();
  id->add_option("--do", targets, "Comma-separated intervention set (empty for none)");
  id->add_option("--outcome", outcome, "Outcome node (defaults to the SCM target)");

  bool with_mis = false;
  auto* pomis = app.add_subcommand("pomis", "List POMIS sets and their observation sets");
  pomis->add_option("scm", scm, "Builtin name or SCM file")->required();
  pomis->add_flag("--mis", with_mis, "Also list minimal intervention sets");

  int iters = 100;
  std::uint64_t seed = 0;
  std::string baseline = "intervene", out;
  auto* ovh = app.add_subcommand("bench-overhead", "Time OSCO against a baseline per iteration");
  ovh->add_option("scm", scm, "Builtin name or SCM file")->required();
  ovh->add_option("--iters", iters, "Timed iterations (at least 10)");
  ovh->add_option("--seed", seed, "Seed");
  ovh->add_option("--baseline", baseline, "Baseline policy");
  ovh->add_option("--out", out, "TSV path (relative paths go below $OSCO_OUTPUT_ROOT)");

  auto* list = app.add_subcommand("list-benchmarks", "List builtin SCMs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(config, workers, plots);
    if (*id) return cmd_identify(scm, targets, outcome);
    if (*pomis) return cmd_pomis(scm, with_mis);
    if (*ovh) return cmd_overhead(scm, iters, seed, baseline, out);
    if (*list) {
      for (const auto& n : benchmark_names()) {
        const ScmSpec& s = builtin_benchmark(n);
        std::cout << std::left << std::setw(16) << n << s.graph.node_set().size() << " nodes, target " << s.target
                  << (s.all_finite() ? ", finite" : "") << "\n";
      }
      return kOk;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunFailed;
  }
  return kOk;
}
