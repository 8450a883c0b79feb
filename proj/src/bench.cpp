#include "osco/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace osco {

namespace {

[[noreturn]] void bad_value(const IniEntry& e, const std::string& what) {
  throw ParseError("[" + e.key + "] " + what, e.line, e.value_column);
}

double to_double(const IniEntry& e, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) bad_value(e, "expected a number, got '" + t + "'");
  return v;
}

double positive(const IniEntry& e) {
  const double v = to_double(e, e.value);
  if (!(v > 0.0) || !std::isfinite(v)) bad_value(e, "must be a positive number");
  return v;
}

double non_negative(const IniEntry& e) {
  const double v = to_double(e, e.value);
  if (!(v >= 0.0) || !std::isfinite(v)) bad_value(e, "must be a non-negative number");
  return v;
}

int positive_int(const IniEntry& e) {
  const double v = to_double(e, e.value);
  if (v < 1 || v != std::floor(v) || v > 1e9) bad_value(e, "must be a positive integer");
  return static_cast<int>(v);
}

bool to_bool(const IniEntry& e) {
  if (e.value == "true" || e.value == "yes" || e.value == "1") return true;
  if (e.value == "false" || e.value == "no" || e.value == "0") return false;
  bad_value(e, "expected true or false");
}

std::vector<std::string> items(const IniEntry& e) {
  std::vector<std::string> out;
  for (const auto& s : split(e.value, ',')) {
    const std::string t = trim(s);
    if (t.empty()) bad_value(e, "empty list item");
    out.push_back(t);
  }
  if (out.empty()) bad_value(e, "list must not be empty");
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const IniEntry&)>;

const std::map<std::string, std::map<std::string, Setter>>& key_table() {
  static const std::map<std::string, std::map<std::string, Setter>> table = {
      {"scm",
       {{"name", [](ExperimentConfig& c, const IniEntry& e) { c.scms = items(e); }}}},
      {"policy",
       {{"policies",
         [](ExperimentConfig& c, const IniEntry& e) {
           c.policies.clear();
           for (const auto& p : items(e)) {
             try {
               c.policies.push_back(TradeoffPolicy::parse(p));
             } catch (const std::invalid_argument& ex) {
               bad_value(e, ex.what());
             }
           }
         }},
        {"loop",
         [](ExperimentConfig& c, const IniEntry& e) {
           if (e.value == "auto") c.loop = LoopKind::Auto;
           else if (e.value == "cbo") c.loop = LoopKind::Cbo;
           else if (e.value == "cucb") c.loop = LoopKind::Cucb;
           else bad_value(e, "expected auto, cbo or cucb");
         }}}},
      {"costs",
       {{"observe_per_var", [](ExperimentConfig& c, const IniEntry& e) { c.run.costs.observe_per_var = positive(e); }},
        {"intervene_per_var",
         [](ExperimentConfig& c, const IniEntry& e) { c.run.costs.intervene_per_var = positive(e); }},
        {"budget", [](ExperimentConfig& c, const IniEntry& e) { c.run.costs.budget = positive(e); }},
        {"obs_cost_grid",
         [](ExperimentConfig& c, const IniEntry& e) {
           c.obs_cost_grid.clear();
           for (const auto& s : items(e)) {
             const double v = to_double(e, s);
             if (!(v > 0.0)) bad_value(e, "grid costs must be positive");
             c.obs_cost_grid.push_back(v);
           }
         }}}},
      {"stopping",
       {{"eta", [](ExperimentConfig& c, const IniEntry& e) { c.run.weights.eta = non_negative(e); }},
        {"kappa", [](ExperimentConfig& c, const IniEntry& e) { c.run.weights.kappa = non_negative(e); }},
        {"tau", [](ExperimentConfig& c, const IniEntry& e) { c.run.weights.tau = non_negative(e); }},
        {"gamma",
         [](ExperimentConfig& c, const IniEntry& e) {
           const double g = positive(e);
           if (g > 1.0) bad_value(e, "discount must lie in (0, 1]");
           c.run.weights.gamma = g;
         }},
        {"n_mc", [](ExperimentConfig& c, const IniEntry& e) { c.run.n_mc = positive_int(e); }}}},
      {"gp",
       {{"length_scale",
         [](ExperimentConfig& c, const IniEntry& e) { c.run.kernel.length_scale = c.run.fit.length_scale = positive(e); }},
        {"signal_variance", [](ExperimentConfig& c, const IniEntry& e) { c.run.kernel.signal_variance = positive(e); }},
        {"noise_variance",
         [](ExperimentConfig& c, const IniEntry& e) {
           c.run.kernel.noise_variance = c.run.fit.noise_variance = positive(e);
         }},
        {"xi", [](ExperimentConfig& c, const IniEntry& e) { c.run.xi = non_negative(e); }},
        {"n_candidates", [](ExperimentConfig& c, const IniEntry& e) { c.run.n_candidates = positive_int(e); }},
        {"prior_mc", [](ExperimentConfig& c, const IniEntry& e) { c.run.prior_mc = positive_int(e); }},
        {"prior_points_per_dim",
         [](ExperimentConfig& c, const IniEntry& e) { c.run.prior_points_per_dim = positive_int(e); }}}},
      {"run",
       {{"seeds",
         [](ExperimentConfig& c, const IniEntry& e) {
           c.seeds.clear();
           for (const auto& s : items(e)) {
             const double v = to_double(e, s);
             if (v < 0 || v != std::floor(v) || v > 9e15) bad_value(e, "seeds must be non-negative integers");
             c.seeds.push_back(static_cast<std::uint64_t>(v));
           }
         }},
        {"output_dir", [](ExperimentConfig& c, const IniEntry& e) {
           if (e.value.empty()) bad_value(e, "must not be empty");
           c.output_dir = e.value;
         }},
        {"workers", [](ExperimentConfig& c, const IniEntry& e) { c.workers = positive_int(e); }},
        {"regret_eps", [](ExperimentConfig& c, const IniEntry& e) { c.regret_eps = non_negative(e); }},
        {"truth_mc", [](ExperimentConfig& c, const IniEntry& e) { c.run.truth_mc = positive_int(e); }},
        {"maximize", [](ExperimentConfig& c, const IniEntry& e) { c.run.maximize = to_bool(e); }},
        {"max_steps", [](ExperimentConfig& c, const IniEntry& e) { c.run.max_steps = positive_int(e); }},
        {"record_timing", [](ExperimentConfig& c, const IniEntry& e) { c.record_timing = to_bool(e); }},
        {"epsilon_full_coverage",
         [](ExperimentConfig& c, const IniEntry& e) { c.run.epsilon_full_coverage = positive(e); }},
        {"optimum_points", [](ExperimentConfig& c, const IniEntry& e) { c.optimum_points = positive_int(e); }},
        {"optimum_mc", [](ExperimentConfig& c, const IniEntry& e) { c.optimum_mc = positive_int(e); }},
        {"optimum_refine_mc",
         [](ExperimentConfig& c, const IniEntry& e) { c.optimum_refine_mc = positive_int(e); }}}},
  };
  return table;
}

ExperimentConfig parse_config_in(const std::string& text, const std::filesystem::path& base) {
  const IniDocument doc = IniDocument::parse(text);
  ExperimentConfig cfg;
  const auto& table = key_table();
  const IniEntry* scm_entry = nullptr;
  for (const auto& sec : doc.sections) {
    if (sec.name.empty()) {
      const IniEntry& e = sec.entries.front();
      throw ParseError("key '" + e.key + "' outside any section", e.line, e.key_column);
    }
    const auto st = table.find(sec.name);
    if (st == table.end()) throw ParseError("unknown section [" + sec.name + "]", sec.line, 1);
    for (const auto& e : sec.entries) {
      const auto setter = st->second.find(e.key);
      if (setter == st->second.end())
        throw ParseError("unknown key '" + e.key + "' in [" + sec.name + "]", e.line, e.key_column);
      setter->second(cfg, e);
      if (sec.name == "scm") scm_entry = &e;
    }
  }
  if (!scm_entry) throw ParseError("missing [scm] name", 1, 1);

  // Relative SCM paths are taken from the config's directory when they exist there.
  for (auto& name : cfg.scms) {
    const auto names = benchmark_names();
    if (std::find(names.begin(), names.end(), name) != names.end()) {
      if (cfg.loop == LoopKind::Cucb && !builtin_benchmark(name).all_finite())
        bad_value(*scm_entry, "causal UCB needs an all-finite SCM, '" + name + "' is continuous");
      continue;
    }
    std::filesystem::path p(name);
    if (p.is_relative() && !base.empty() && std::filesystem::exists(base / p)) p = base / p;
    try {
      const ScmSpec spec = resolve_scm(p.string());
      if (cfg.loop == LoopKind::Cucb && !spec.all_finite())
        bad_value(*scm_entry, "causal UCB needs an all-finite SCM, '" + name + "' is continuous");
    } catch (const ParseError& pe) {
      if (pe.line() == scm_entry->line) throw;
      bad_value(*scm_entry, "cannot load SCM '" + name + "': " + pe.what());
    } catch (const std::exception& ex) {
      bad_value(*scm_entry, "unknown SCM '" + name + "': " + ex.what());
    }
    name = p.string();
  }
  return cfg;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) { return parse_config_in(text, {}); }

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_in(ss.str(), path.parent_path());
}

std::vector<ExperimentConfig> expand_ablation(const ExperimentConfig& cfg) {
  if (cfg.obs_cost_grid.empty()) return {cfg};
  std::vector<ExperimentConfig> out;
  for (double c : cfg.obs_cost_grid) {
    ExperimentConfig one = cfg;
    one.obs_cost_grid.clear();
    one.run.costs.observe_per_var = c;
    out.push_back(std::move(one));
  }
  return out;
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);
  const char* root = std::getenv(kOutputRootEnv);
  if (root && *root && dir.is_relative()) return std::filesystem::path(root) / dir;
  return dir;
}

// ------------------------------------------------------------------ summaries

MeanSem mean_sem(const std::vector<double>& xs) {
  MeanSem m;
  if (xs.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double s = 0.0;
  for (double x : xs) s += x;
  m.mean = s / static_cast<double>(xs.size());
  if (xs.size() < 2) return m;
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  const double n = static_cast<double>(xs.size());
  m.sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return m;
}

bool RunSummary::all_complete() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunRecord& r) { return r.complete; });
}

RunRecord summarize_trace(const Trace& trace, double optimum, double eps, bool maximize) {
  RunRecord r;
  r.scm = trace.scm;
  r.policy = trace.policy;
  r.seed = trace.seed;
  r.optimum = optimum;
  r.complete = trace.complete;
  r.error = trace.error;
  r.n_observe = trace.count("observe");
  r.n_intervene = trace.count("intervene");
  r.final_regret = r.cost_to_eps = std::numeric_limits<double>::infinity();
  std::vector<TraceStep> acted;
  for (const auto& s : trace.steps)
    if (s.stage_kind != "stop") acted.push_back(s);
  if (!acted.empty()) {
    Trace t;
    t.steps = acted;
    const auto curve = simple_regret(t, optimum, maximize);
    r.final_regret = curve.back().regret;
    r.cost_to_eps = cost_to_regret(curve, eps);
    double w = 0.0;
    for (const auto& s : acted) w += s.wall_ms;
    r.mean_wall_ms = w / static_cast<double>(acted.size());
  }
  return r;
}

std::vector<AggregateRow> aggregate_runs(const std::vector<RunRecord>& runs) {
  std::vector<AggregateRow> rows;
  std::vector<std::vector<const RunRecord*>> members;
  for (const auto& r : runs) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const AggregateRow& a) {
      return a.scm == r.scm && a.obs_cost == r.obs_cost && a.policy == r.policy;
    });
    if (it == rows.end()) {
      rows.push_back(AggregateRow{r.scm, r.obs_cost, r.policy, 0, 0, 0, {}, {}, {}, {}, {}});
      members.emplace_back();
      it = rows.end() - 1;
    }
    members[static_cast<size_t>(it - rows.begin())].push_back(&r);
  }
  for (size_t i = 0; i < rows.size(); ++i) {
    AggregateRow& a = rows[i];
    std::vector<double> regret, cost, obs, iv, wall;
    for (const RunRecord* r : members[i]) {
      ++a.n_seeds;
      if (!r->complete) {
        ++a.n_failed;
        continue;
      }
      a.n_reached += std::isfinite(r->cost_to_eps);
      regret.push_back(r->final_regret);
      cost.push_back(r->cost_to_eps);
      obs.push_back(r->n_observe);
      iv.push_back(r->n_intervene);
      wall.push_back(r->mean_wall_ms);
    }
    a.final_regret = mean_sem(regret);
    a.cost_to_eps = mean_sem(cost);
    a.n_observe = mean_sem(obs);
    a.n_intervene = mean_sem(iv);
    a.wall_ms = mean_sem(wall);
  }
  return rows;
}

double reference_optimum(const ScmSpec& spec, const ExperimentConfig& cfg) {
  static std::mutex mu;
  static std::map<std::string, double> cache;
  std::ostringstream key;
  key << spec.name << '|' << serialize_scm(spec).size() << '|' << cfg.optimum_points << '|' << cfg.optimum_mc << '|'
      << cfg.optimum_refine_mc << '|' << cfg.run.maximize;
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(key.str()); it != cache.end()) return it->second;
  }
  const double v =
      grid_optimum(spec, cfg.optimum_points, cfg.optimum_mc, cfg.optimum_refine_mc, cfg.run.maximize).value;
  std::lock_guard lock(mu);
  cache.emplace(key.str(), v);
  return v;
}

std::string run_stem(const std::string& scm, const TradeoffPolicy& policy, double obs_cost, std::uint64_t seed) {
  std::string p = policy.name();
  std::replace(p.begin(), p.end(), '(', '-');
  p.erase(std::remove(p.begin(), p.end(), ')'), p.end());
  std::string s = std::filesystem::path(scm).stem().string();
  return s + "__" + p + "__c" + format_double(obs_cost) + "__s" + std::to_string(seed);
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

void write_runs_csv(std::ostream& os, const std::vector<RunRecord>& runs) {
  os << "scm,obs_cost,policy,seed,optimum,final_regret,cost_to_eps,n_observe,n_intervene,mean_wall_ms,complete,"
        "error,trace\n";
  for (const auto& r : runs)
    os << csv_text(r.scm) << ',' << num(r.obs_cost) << ',' << csv_text(r.policy.name()) << ',' << r.seed << ','
       << num(r.optimum) << ',' << num(r.final_regret) << ',' << num(r.cost_to_eps) << ',' << r.n_observe << ','
       << r.n_intervene << ',' << num(r.mean_wall_ms) << ',' << (r.complete ? 1 : 0) << ',' << csv_text(r.error)
       << ',' << csv_text(r.trace_path.filename().string()) << '\n';
}

void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
  os << "scm,obs_cost,policy,n_seeds,n_failed,n_reached,final_regret_mean,final_regret_sem,cost_to_eps_mean,"
        "cost_to_eps_sem,n_observe_mean,n_observe_sem,n_intervene_mean,n_intervene_sem,wall_ms_mean,wall_ms_sem\n";
  for (const auto& a : rows) {
    os << csv_text(a.scm) << ',' << num(a.obs_cost) << ',' << csv_text(a.policy.name()) << ',' << a.n_seeds << ','
       << a.n_failed << ',' << a.n_reached;
    for (const MeanSem* m : {&a.final_regret, &a.cost_to_eps, &a.n_observe, &a.n_intervene, &a.wall_ms})
      os << ',' << num(m->mean) << ',' << num(m->sem);
    os << '\n';
  }
}

// ------------------------------------------------------------------ execution

namespace {

struct Cell {
  std::string scm;
  const ScmSpec* spec = nullptr;
  RunConfig run;
  TradeoffPolicy policy;
  std::uint64_t seed = 0;
};

Trace run_cell(const Cell& c, LoopKind loop) {
  const bool bandit = loop == LoopKind::Cucb || (loop == LoopKind::Auto && c.spec->all_finite());
  return bandit ? run_cucb(*c.spec, c.policy, c.seed, c.run) : run_cbo(*c.spec, c.policy, c.seed, c.run);
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& cfg) {
  const std::filesystem::path out = resolve_output_dir(cfg);
  std::filesystem::create_directories(out / "traces");

  std::map<std::string, ScmSpec> specs;
  std::map<std::string, double> optimum;
  for (const auto& name : cfg.scms) {
    ScmSpec spec = resolve_scm(name);
    optimum[name] = reference_optimum(spec, cfg);
    specs.emplace(name, std::move(spec));
  }

  std::vector<Cell> cells;
  for (const auto& one : expand_ablation(cfg))
    for (const auto& name : cfg.scms)
      for (const auto& p : cfg.policies)
        for (auto seed : cfg.seeds) cells.push_back(Cell{name, &specs.at(name), one.run, p, seed});

  RunSummary summary;
  summary.regret_eps = cfg.regret_eps;
  summary.budget = cfg.run.costs.budget;
  summary.maximize = cfg.run.maximize;
  summary.runs.resize(cells.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < cells.size(); i = next++) {
      const Cell& c = cells[i];
      RunRecord rec;
      const std::filesystem::path path =
          out / "traces" / (run_stem(c.scm, c.policy, c.run.costs.observe_per_var, c.seed) + ".csv");
      try {
        const Trace t = run_cell(c, cfg.loop);
        rec = summarize_trace(t, optimum.at(c.scm), cfg.regret_eps, cfg.run.maximize);
        std::ostringstream os;
        write_trace_csv(os, t, cfg.record_timing);
        write_file(path, os.str());
      } catch (const std::exception& e) {
        rec.complete = false;
        rec.error = e.what();
        rec.final_regret = rec.cost_to_eps = std::numeric_limits<double>::infinity();
      }
      rec.scm = c.scm;
      rec.policy = c.policy;
      rec.seed = c.seed;
      rec.optimum = optimum.at(c.scm);
      rec.obs_cost = c.run.costs.observe_per_var;
      rec.trace_path = path;
      summary.runs[i] = std::move(rec);
    }
  };
  const int n_workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  summary.aggregate = aggregate_runs(summary.runs);
  std::ostringstream runs, agg;
  write_runs_csv(runs, summary.runs);
  write_aggregate_csv(agg, summary.aggregate);
  write_file(out / "runs.csv", runs.str());
  write_file(out / "aggregate.csv", agg.str());
  return summary;
}

// ------------------------------------------------------------------- overhead

OverheadResult measure_overhead(const ScmSpec& spec, int n_iter, std::uint64_t seed, const TradeoffPolicy& baseline,
                                RunConfig cfg, int warm_rows) {
  constexpr int kWarmup = 5;
  if (n_iter < 10) throw std::invalid_argument("measure_overhead needs n_iter >= 10");
  if (baseline.kind == PolicyKind::Osco) throw std::invalid_argument("baseline must not be OSCO");

  auto data = std::make_shared<Dataset>();
  for (auto& row : sample_observational(spec, spec.graph.node_set(), warm_rows, mix_seed(seed, 424242)))
    data->add(std::move(row));
  int k = 0;
  for (const auto& set : enumerate_pomis(spec.graph, spec.target, spec.manipulative)) {
    std::vector<std::string> vars(set.begin(), set.end());
    std::vector<double> mid;
    for (const auto& v : vars) {
      const Domain& d = spec.domains.at(v);
      mid.push_back(d.finite ? d.levels.front() : 0.5 * (d.lo + d.hi));
    }
    const Intervention iv(vars, mid);
    for (auto& row : sample_interventional(spec, iv, 1, mix_seed(seed, 525252 + static_cast<std::uint64_t>(k++))))
      data->add(std::move(row));
  }
  cfg.warm_start = data;
  cfg.costs.budget = 1e6;
  cfg.max_steps = n_iter + kWarmup;
  cfg.truth_mc = std::min(cfg.truth_mc, 200);

  auto time_policy = [&](const TradeoffPolicy& p) {
    const Trace t = spec.all_finite() ? run_cucb(spec, p, seed, cfg) : run_cbo(spec, p, seed, cfg);
    if (!t.complete) throw std::runtime_error("overhead run failed: " + t.error);
    std::vector<double> ms;
    for (const auto& s : t.steps)
      if (s.stage_kind != "stop") ms.push_back(s.wall_ms);
    if (static_cast<int>(ms.size()) < kWarmup + 2) throw std::runtime_error("overhead run stopped early");
    ms.erase(ms.begin(), ms.begin() + kWarmup);
    OverheadStat st;
    st.label = p.name();
    st.n = static_cast<int>(ms.size());
    double s = 0.0;
    for (double v : ms) s += v;
    st.mean_ms = s / st.n;
    double ss = 0.0;
    for (double v : ms) ss += (v - st.mean_ms) * (v - st.mean_ms);
    st.std_ms = std::sqrt(ss / (st.n - 1));
    return st;
  };
  OverheadResult r;
  r.baseline = time_policy(baseline);
  r.osco = time_policy({PolicyKind::Osco});
  r.ratio = r.osco.mean_ms / r.baseline.mean_ms;
  return r;
}

// ------------------------------------------------------------------ plot data

std::vector<ConvergencePoint> convergence_series(const std::vector<std::vector<RegretPoint>>& curves, double budget) {
  std::vector<ConvergencePoint> out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<size_t> pos(curves.size(), 0);
  for (int c = 0; c <= static_cast<int>(std::floor(budget)); ++c) {
    std::vector<double> vals;
    bool defined = !curves.empty();
    for (size_t i = 0; i < curves.size(); ++i) {
      const auto& cv = curves[i];
      while (pos[i] < cv.size() && cv[pos[i]].cum_cost <= c) ++pos[i];
      const double v = pos[i] == 0 ? std::numeric_limits<double>::infinity() : cv[pos[i] - 1].regret;
      if (!std::isfinite(v)) defined = false;
      vals.push_back(v);
    }
    if (!defined) {
      out.push_back({static_cast<double>(c), nan, nan, nan});
      continue;
    }
    const MeanSem m = mean_sem(vals);
    out.push_back({static_cast<double>(c), m.mean, m.mean - m.sem, m.mean + m.sem});
  }
  return out;
}

void write_convergence_tsv(std::ostream& os, const std::map<std::string, std::vector<ConvergencePoint>>& by_policy) {
  os << "policy\tcost\tregret_mean\tregret_lower\tregret_upper\n";
  bool first = true;
  for (const auto& [policy, pts] : by_policy) {
    if (!first) os << "\n\n";  // gnuplot index separator
    first = false;
    for (const auto& p : pts)
      os << policy << '\t' << num(p.cost) << '\t' << num(p.mean) << '\t' << num(p.lower) << '\t' << num(p.upper)
         << '\n';
  }
}

void write_actions_tsv(std::ostream& os, const std::vector<Trace>& traces) {
  os << "policy\tseed\tstep\tcum_cost\tn_observe\tn_intervene\n";
  bool first = true;
  for (const auto& t : traces) {
    if (!first) os << "\n\n";
    first = false;
    int obs = 0, iv = 0;
    for (const auto& s : t.steps) {
      if (s.stage_kind == "stop") continue;
      obs += s.stage_kind == "observe";
      iv += s.stage_kind == "intervene";
      os << t.policy.name() << '\t' << t.seed << '\t' << s.step << '\t' << num(s.cum_cost) << '\t' << obs << '\t'
         << iv << '\n';
    }
  }
}

void write_overhead_tsv(std::ostream& os, const OverheadResult& r) {
  os << "label\tmean_ms\tstd_ms\tn\tratio\n";
  os << r.baseline.label << '\t' << num(r.baseline.mean_ms) << '\t' << num(r.baseline.std_ms) << '\t' << r.baseline.n
     << "\t1\n";
  os << r.osco.label << '\t' << num(r.osco.mean_ms) << '\t' << num(r.osco.std_ms) << '\t' << r.osco.n << '\t'
     << num(r.ratio) << '\n';
}

std::vector<std::filesystem::path> emit_plot_data(const RunSummary& summary,
                                                  const std::map<std::string, Trace>& traces_by_stem,
                                                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  // (scm, obs_cost) groups in first-seen order.
  std::vector<std::pair<std::string, double>> groups;
  for (const auto& r : summary.runs) {
    const std::pair<std::string, double> g{r.scm, r.obs_cost};
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
  }
  for (const auto& [scm, cost] : groups) {
    std::map<std::string, std::vector<std::vector<RegretPoint>>> curves;
    std::vector<Trace> traces;
    for (const auto& r : summary.runs) {
      if (r.scm != scm || r.obs_cost != cost || !r.complete) continue;
      const auto it = traces_by_stem.find(run_stem(r.scm, r.policy, r.obs_cost, r.seed));
      if (it == traces_by_stem.end()) continue;
      std::vector<TraceStep> acted;
      for (const auto& s : it->second.steps)
        if (s.stage_kind != "stop") acted.push_back(s);
      traces.push_back(it->second);
      if (acted.empty()) continue;
      Trace t;
      t.steps = std::move(acted);
      curves[r.policy.name()].push_back(simple_regret(t, r.optimum, summary.maximize));
    }
    std::map<std::string, std::vector<ConvergencePoint>> series;
    for (const auto& [p, cs] : curves) series[p] = convergence_series(cs, summary.budget);
    const std::string tag = std::filesystem::path(scm).stem().string() + "__c" + format_double(cost);
    std::ostringstream conv, act;
    write_convergence_tsv(conv, series);
    write_actions_tsv(act, traces);
    written.push_back(dir / ("convergence_" + tag + ".tsv"));
    write_file(written.back(), conv.str());
    written.push_back(dir / ("actions_" + tag + ".tsv"));
    write_file(written.back(), act.str());
  }
  return written;
}

}  // namespace osco
