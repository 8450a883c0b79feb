#include "osco/scm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "osco/benchmarks_embedded.hpp"
#include "osco/ini.hpp"

namespace osco {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_number(const std::string& s) {
  double v = 0.0;
  const std::string t = trim(s);
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw std::invalid_argument("not a number: '" + t + "'");
  return v;
}

// "name(a, b)" -> name and numeric arguments.
std::pair<std::string, std::vector<double>> parse_call(const std::string& text) {
  const size_t open = text.find('(');
  const size_t close = text.rfind(')');
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw std::invalid_argument("expected name(args): '" + text + "'");
  std::vector<double> args;
  for (const auto& a : split(std::string_view(text).substr(open + 1, close - open - 1), ','))
    args.push_back(parse_number(a));
  return {trim(std::string_view(text).substr(0, open)), args};
}

std::vector<std::string> parse_names(const std::string& text) { return split(text, ','); }

Intervention parse_assignment(const std::string& text) {
  Intervention iv;
  for (const auto& part : split(text, ';')) {
    const size_t eq = part.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("expected name=value: '" + part + "'");
    iv.targets.push_back(trim(std::string_view(part).substr(0, eq)));
    iv.values.push_back(parse_number(part.substr(eq + 1)));
  }
  return iv;
}

}  // namespace

double Noise::mean() const {
  switch (kind) {
    case Kind::Normal: return a;
    case Kind::Uniform: return 0.5 * (a + b);
    case Kind::Bernoulli: return a;
  }
  return 0.0;
}

std::string Noise::to_string() const {
  switch (kind) {
    case Kind::Normal: return "normal(" + format_double(a) + ", " + format_double(b) + ")";
    case Kind::Uniform: return "uniform(" + format_double(a) + ", " + format_double(b) + ")";
    case Kind::Bernoulli: return "bernoulli(" + format_double(a) + ")";
  }
  return {};
}

Noise Noise::parse(const std::string& text) {
  auto [name, args] = parse_call(text);
  Noise n;
  if (name == "normal" && args.size() == 2) {
    n = Noise{Kind::Normal, args[0], args[1]};
    if (!(n.b >= 0.0)) throw std::invalid_argument("normal std must be >= 0");
  } else if (name == "uniform" && args.size() == 2) {
    n = Noise{Kind::Uniform, args[0], args[1]};
    if (!(n.a <= n.b)) throw std::invalid_argument("uniform bounds reversed");
  } else if (name == "bernoulli" && args.size() == 1) {
    n = Noise{Kind::Bernoulli, args[0], 0.0};
    if (!(n.a >= 0.0 && n.a <= 1.0)) throw std::invalid_argument("bernoulli p outside [0,1]");
  } else {
    throw std::invalid_argument("unknown noise law '" + text + "'");
  }
  return n;
}

bool Domain::contains(double v, double tol) const {
  if (finite)
    return std::any_of(levels.begin(), levels.end(), [&](double l) { return std::abs(l - v) <= tol; });
  return v >= lo - tol && v <= hi + tol;
}

std::string Domain::to_string() const {
  std::string out;
  if (finite) {
    out = "{";
    for (size_t i = 0; i < levels.size(); ++i) out += (i ? ", " : "") + format_double(levels[i]);
    return out + "}";
  }
  return "[" + format_double(lo) + ", " + format_double(hi) + "]";
}

Domain Domain::interval(double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("domain bounds reversed");
  Domain d;
  d.lo = lo;
  d.hi = hi;
  return d;
}

Domain Domain::set(std::vector<double> levels) {
  if (levels.empty()) throw std::invalid_argument("empty finite domain");
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  Domain d;
  d.finite = true;
  d.lo = levels.front();
  d.hi = levels.back();
  d.levels = std::move(levels);
  return d;
}

Domain Domain::parse(const std::string& text) {
  const std::string t = trim(text);
  if (t.size() >= 2 && t.front() == '[' && t.back() == ']') {
    auto parts = split(std::string_view(t).substr(1, t.size() - 2), ',');
    if (parts.size() != 2) throw std::invalid_argument("interval needs two bounds: '" + t + "'");
    return interval(parse_number(parts[0]), parse_number(parts[1]));
  }
  if (t.size() >= 2 && t.front() == '{' && t.back() == '}') {
    std::vector<double> levels;
    for (const auto& p : split(std::string_view(t).substr(1, t.size() - 2), ','))
      levels.push_back(parse_number(p));
    return set(levels);
  }
  throw std::invalid_argument("domain must be [lo, hi] or {a, b, ...}: '" + t + "'");
}

Intervention::Intervention(std::vector<std::string> t, std::vector<double> v)
    : targets(std::move(t)), values(std::move(v)) {
  if (targets.size() != values.size())
    throw std::invalid_argument("intervention targets and values differ in length");
}

double Intervention::value_of(const std::string& v) const {
  for (size_t i = 0; i < targets.size(); ++i)
    if (targets[i] == v) return values[i];
  throw std::out_of_range("'" + v + "' is not an intervention target");
}

std::string Intervention::set_label() const {
  VarSet s = target_set();
  std::string out;
  for (const auto& v : s) out += (out.empty() ? "" : ",") + v;
  return out;
}

std::string Intervention::values_label() const {
  std::vector<size_t> idx(targets.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return targets[a] < targets[b]; });
  std::string out;
  for (size_t i : idx) out += (out.empty() ? "" : ";") + targets[i] + "=" + format_double(values[i]);
  return out;
}

bool SampleRow::has_all(const VarSet& vs) const {
  return std::all_of(vs.begin(), vs.end(), [&](const std::string& v) { return has(v); });
}

double SampleRow::at(const std::string& v) const {
  auto it = values.find(v);
  if (it == values.end()) throw std::out_of_range("row has no value for '" + v + "'");
  return it->second;
}

bool ScmSpec::all_finite(const VarSet& vs) const {
  for (const auto& v : vs) {
    auto it = domains.find(v);
    if (it == domains.end() || !it->second.finite) return false;
  }
  return true;
}

std::map<std::string, VarSet> ScmSpec::noise_users() const {
  std::map<std::string, VarSet> users;
  for (const auto& [node, fn] : functions)
    for (const auto& name : fn.variables())
      if (noise.count(name)) users[name].insert(node);
  return users;
}

ValidationReport validate(const ScmSpec& spec) {
  ValidationReport r;
  const CausalGraph& g = spec.graph;
  auto issue = [&](std::string s) { r.issues.push_back(std::move(s)); };

  for (const auto& [p, c] : g.directed()) {
    if (!g.has_node(p) || !g.has_node(c)) issue("edge " + p + "->" + c + " uses an undeclared node");
    if (p == c) issue("self-loop on " + p + " is a directed cycle");
  }
  if (!g.is_acyclic()) issue("directed part of the graph has a cycle");
  for (const auto& [a, b] : g.bidirected()) {
    if (!g.has_node(a) || !g.has_node(b)) issue("bidirected edge " + a + "<->" + b + " uses an undeclared node");
    if (a == b) issue("bidirected edge on a single node " + a);
  }

  if (spec.target.empty() || !g.has_node(spec.target)) issue("target is not a declared node");
  if (!spec.non_manipulative.count(spec.target)) issue("target must be non-manipulative");
  for (const auto& v : spec.manipulative) {
    if (!g.has_node(v)) issue("manipulative variable " + v + " is not a node");
    if (spec.non_manipulative.count(v)) issue(v + " is both manipulative and non-manipulative");
  }
  for (const auto& v : spec.non_manipulative)
    if (!g.has_node(v)) issue("non-manipulative variable " + v + " is not a node");
  if (!(spec.target_bound > 0.0)) issue("target bound must be positive");

  for (const auto& v : g.nodes()) {
    if (!spec.domains.count(v)) issue("no domain for " + v);
    auto fit = spec.functions.find(v);
    if (fit == spec.functions.end()) {
      issue("no structural function for " + v);
      continue;
    }
    const VarSet pa = g.parents(v);
    for (const auto& name : fit->second.variables()) {
      if (spec.noise.count(name)) continue;
      if (g.has_node(name)) {
        if (!pa.count(name)) issue("function of " + v + " reads " + name + " which is not a parent");
      } else {
        issue("function of " + v + " reads undeclared name " + name);
      }
    }
  }
  for (const auto& [node, fn] : spec.functions)
    if (!g.has_node(node)) issue("function given for undeclared node " + node);

  std::set<Edge> shared;
  for (const auto& [name, users] : spec.noise_users())
    for (auto a = users.begin(); a != users.end(); ++a)
      for (auto b = std::next(a); b != users.end(); ++b) shared.emplace(*a, *b);
  for (const auto& e : shared)
    if (!g.bidirected().count(e))
      issue("noise shared by " + e.first + " and " + e.second + " without a bidirected edge");
  for (const auto& e : g.bidirected())
    if (!shared.count(e))
      issue("bidirected edge " + e.first + "<->" + e.second + " has no shared noise term");
  return r;
}

ScmSpec parse_scm(const std::string& text, const std::string& name) {
  const IniDocument doc = IniDocument::parse(text);
  ScmSpec spec;
  spec.name = name;
  static const VarSet kSections = {"nodes", "edges", "bidirected", "functions",
                                   "noise", "domains", "roles",      "reference"};
  for (const auto& s : doc.sections)
    if (!kSections.count(s.name)) throw ParseError("unknown section [" + s.name + "]", s.line, 1);

  auto guarded = [](const IniEntry& e, auto&& fn) {
    try {
      fn();
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& ex) {
      throw ParseError(ex.what(), e.line, e.value_column);
    }
  };

  const IniSection* nodes = doc.find("nodes");
  if (!nodes || !nodes->find("order")) throw ParseError("missing [nodes] order", 1, 1);
  for (const auto& e : nodes->entries) {
    if (e.key != "order") throw ParseError("unknown key '" + e.key + "' in [nodes]", e.line, 1);
    for (const auto& v : parse_names(e.value)) spec.graph.add_node(v);
  }
  if (const IniSection* s = doc.find("edges"))
    for (const auto& e : s->entries)
      for (const auto& p : parse_names(e.value)) spec.graph.add_edge(p, e.key);
  if (const IniSection* s = doc.find("bidirected"))
    for (const auto& e : s->entries) {
      auto ends = parse_names(e.value);
      if (ends.size() != 2) throw ParseError("bidirected edge needs two endpoints", e.line, e.value_column);
      spec.graph.add_bidirected(ends[0], ends[1]);
    }
  if (const IniSection* s = doc.find("functions"))
    for (const auto& e : s->entries) {
      try {
        spec.functions[e.key] = Expr::parse(e.value);
      } catch (const ParseError& pe) {
        throw ParseError(pe.what(), e.line, e.value_column + pe.column() - 1);
      }
    }
  if (const IniSection* s = doc.find("noise"))
    for (const auto& e : s->entries)
      guarded(e, [&] {
        spec.noise[e.key] = Noise::parse(e.value);
        spec.noise_order.push_back(e.key);
      });
  if (const IniSection* s = doc.find("domains"))
    for (const auto& e : s->entries) guarded(e, [&] { spec.domains[e.key] = Domain::parse(e.value); });
  if (const IniSection* s = doc.find("roles")) {
    for (const auto& e : s->entries) {
      guarded(e, [&] {
        if (e.key == "manipulative") {
          auto v = parse_names(e.value);
          spec.manipulative = VarSet(v.begin(), v.end());
        } else if (e.key == "non_manipulative") {
          auto v = parse_names(e.value);
          spec.non_manipulative = VarSet(v.begin(), v.end());
        } else if (e.key == "target") {
          spec.target = trim(e.value);
        } else if (e.key == "bound") {
          spec.target_bound = parse_number(e.value);
        } else if (e.key == "measurement_std") {
          spec.measurement_std = parse_number(e.value);
        } else {
          throw ParseError("unknown key '" + e.key + "' in [roles]", e.line, 1);
        }
      });
    }
  }
  if (const IniSection* s = doc.find("reference")) {
    for (const auto& e : s->entries) {
      guarded(e, [&] {
        BenchmarkReference& ref = spec.reference;
        if (e.key == "mis") {
          ref.mis = parse_family(e.value);
        } else if (e.key == "pomis") {
          ref.pomis = parse_family(e.value);
        } else if (e.key.rfind("mos.", 0) == 0) {
          auto iv = split(std::string_view(e.key).substr(4), ',');
          auto obs = parse_names(e.value);
          ref.mos[VarSet(iv.begin(), iv.end())] = VarSet(obs.begin(), obs.end());
        } else if (e.key == "optimum") {
          const size_t arrow = e.value.find("->");
          if (arrow == std::string::npos) throw std::invalid_argument("optimum needs 'assignment -> value'");
          ref.optimum = parse_assignment(e.value.substr(0, arrow));
          ref.optimum_value = parse_number(e.value.substr(arrow + 2));
        } else {
          throw ParseError("unknown key '" + e.key + "' in [reference]", e.line, 1);
        }
      });
    }
  }
  return spec;
}

ScmSpec load_scm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open SCM file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string stem = path;
  if (auto slash = stem.find_last_of('/'); slash != std::string::npos) stem = stem.substr(slash + 1);
  if (auto dot = stem.rfind('.'); dot != std::string::npos) stem = stem.substr(0, dot);
  return parse_scm(ss.str(), stem);
}

std::string serialize_scm(const ScmSpec& spec) {
  std::ostringstream o;
  auto join = [](const auto& names) {
    std::string out;
    for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
    return out;
  };
  const CausalGraph& g = spec.graph;
  o << "[nodes]\norder = " << join(g.nodes()) << "\n\n[edges]\n";
  for (const auto& v : g.nodes()) {
    VarSet pa = g.parents(v);
    if (!pa.empty()) o << v << " = " << join(pa) << "\n";
  }
  o << "\n[bidirected]\n";
  int k = 0;
  for (const auto& [a, b] : g.bidirected()) o << "latent" << k++ << " = " << a << ", " << b << "\n";
  o << "\n[functions]\n";
  for (const auto& v : g.nodes())
    if (spec.functions.count(v)) o << v << " = " << spec.functions.at(v).text() << "\n";
  o << "\n[noise]\n";
  for (const auto& n : spec.noise_order) o << n << " = " << spec.noise.at(n).to_string() << "\n";
  o << "\n[domains]\n";
  for (const auto& v : g.nodes())
    if (spec.domains.count(v)) o << v << " = " << spec.domains.at(v).to_string() << "\n";
  o << "\n[roles]\nmanipulative = " << join(spec.manipulative)
    << "\nnon_manipulative = " << join(spec.non_manipulative) << "\ntarget = " << spec.target
    << "\nbound = " << format_double(spec.target_bound) << "\n";
  if (spec.measurement_std != 0.0) o << "measurement_std = " << format_double(spec.measurement_std) << "\n";
  const BenchmarkReference& ref = spec.reference;
  o << "\n[reference]\n";
  auto fam = [&](const Family& f) {
    std::string out;
    for (const auto& s : f) out += (out.empty() ? "{" : "; {") + join(s) + "}";
    return out;
  };
  if (ref.mis) o << "mis = " << fam(*ref.mis) << "\n";
  if (ref.pomis) o << "pomis = " << fam(*ref.pomis) << "\n";
  for (const auto& [iv, obs] : ref.mos) {
    std::string key;
    for (const auto& v : iv) key += (key.empty() ? "" : ",") + v;
    o << "mos." << key << " = " << join(obs) << "\n";
  }
  if (ref.optimum && ref.optimum_value) {
    std::string a;
    for (size_t i = 0; i < ref.optimum->targets.size(); ++i)
      a += (i ? "; " : "") + ref.optimum->targets[i] + "=" + format_double(ref.optimum->values[i]);
    o << "optimum = " << a << " -> " << format_double(*ref.optimum_value) << "\n";
  }
  return o.str();
}

void check_intervention(const ScmSpec& spec, const Intervention& iv) {
  if (iv.targets.size() != iv.values.size())
    throw std::invalid_argument("intervention targets and values differ in length");
  VarSet seen;
  for (size_t i = 0; i < iv.targets.size(); ++i) {
    const std::string& v = iv.targets[i];
    if (!spec.graph.has_node(v)) throw std::invalid_argument("unknown variable '" + v + "'");
    if (!spec.manipulative.count(v)) throw std::invalid_argument("'" + v + "' is not manipulative");
    if (!seen.insert(v).second) throw std::invalid_argument("'" + v + "' intervened twice");
    if (!spec.domains.at(v).contains(iv.values[i]))
      throw std::invalid_argument("value " + format_double(iv.values[i]) + " outside dom(" + v + ") = " +
                                  spec.domains.at(v).to_string());
  }
}

ScmSampler::ScmSampler(const ScmSpec& spec, const Intervention& iv) : spec_(&spec) {
  const auto& nodes = spec.graph.nodes();
  n_nodes_ = static_cast<int>(nodes.size());
  std::map<std::string, int> slots;
  for (int i = 0; i < n_nodes_; ++i) slots[nodes[i]] = i;
  for (size_t j = 0; j < spec.noise_order.size(); ++j) {
    slots[spec.noise_order[j]] = n_nodes_ + static_cast<int>(j);
    noises_.push_back(spec.noise.at(spec.noise_order[j]));
  }
  slots_.assign(slots.size(), 0.0);
  for (const auto& v : spec.graph.topological_order()) {
    Step st{slots.at(v), false, 0.0, {}};
    if (std::find(iv.targets.begin(), iv.targets.end(), v) != iv.targets.end()) {
      st.fixed = true;
      st.value = iv.value_of(v);
    } else {
      auto it = spec.functions.find(v);
      if (it == spec.functions.end()) throw std::invalid_argument("no structural function for " + v);
      st.fn = CompiledExpr(it->second, slots);
    }
    steps_.push_back(std::move(st));
  }
}

int ScmSampler::index_of(const std::string& node) const {
  const auto& nodes = spec_->graph.nodes();
  auto it = std::find(nodes.begin(), nodes.end(), node);
  if (it == nodes.end()) throw std::invalid_argument("unknown variable '" + node + "'");
  return static_cast<int>(it - nodes.begin());
}

void ScmSampler::draw(std::mt19937_64& rng, std::vector<double>& out) {
  for (size_t j = 0; j < noises_.size(); ++j) {
    const Noise& nz = noises_[j];
    double v = 0.0;
    switch (nz.kind) {
      case Noise::Kind::Normal: v = nz.a + nz.b * normal_(rng); break;
      case Noise::Kind::Uniform: v = nz.a + (nz.b - nz.a) * unif_(rng); break;
      case Noise::Kind::Bernoulli: v = unif_(rng) < nz.a ? 1.0 : 0.0; break;
    }
    slots_[n_nodes_ + j] = v;
  }
  for (const Step& st : steps_) slots_[st.slot] = st.fixed ? st.value : st.fn.eval(slots_.data());
  out.assign(slots_.begin(), slots_.begin() + n_nodes_);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<SampleRow> sample_observational(const ScmSpec& spec, const VarSet& observe, int n,
                                            std::uint64_t seed) {
  spec.graph.require_known(observe);
  if (n < 1) throw std::invalid_argument("sample count must be >= 1");
  if (auto rep = validate(spec); !rep.ok()) throw std::invalid_argument("invalid SCM: " + rep.issues.front());
  ScmSampler sampler(spec, Intervention{});
  std::vector<std::pair<std::string, int>> cols;
  for (const auto& v : observe) cols.emplace_back(v, sampler.index_of(v));
  std::mt19937_64 rng(mix_seed(seed, 0));
  std::vector<double> buf;
  std::vector<SampleRow> rows(static_cast<size_t>(n));
  for (auto& row : rows) {
    sampler.draw(rng, buf);
    for (const auto& [v, i] : cols) row.values.emplace(v, buf[i]);
  }
  return rows;
}

std::vector<SampleRow> sample_interventional(const ScmSpec& spec, const Intervention& iv, int n,
                                             std::uint64_t seed) {
  check_intervention(spec, iv);
  if (n < 1) throw std::invalid_argument("sample count must be >= 1");
  ScmSampler sampler(spec, iv);
  std::mt19937_64 rng(mix_seed(seed, 1));
  std::normal_distribution<double> meas(0.0, 1.0);
  const auto& nodes = spec.graph.nodes();
  std::vector<double> buf;
  std::vector<SampleRow> rows(static_cast<size_t>(n));
  for (auto& row : rows) {
    sampler.draw(rng, buf);
    for (size_t i = 0; i < nodes.size(); ++i) row.values.emplace(nodes[i], buf[i]);
    if (spec.measurement_std > 0.0) row.values[spec.target] += spec.measurement_std * meas(rng);
    row.kind = RowKind::Interventional;
    row.iv = iv;
  }
  return rows;
}

MeanEstimate mc_ground_truth(const ScmSpec& spec, const Intervention& iv, int n, std::uint64_t seed) {
  check_intervention(spec, iv);
  if (n < 2) throw std::invalid_argument("mc_ground_truth needs n >= 2");
  ScmSampler sampler(spec, iv);
  const int yi = sampler.index_of(spec.target);
  std::mt19937_64 rng(mix_seed(seed, 2));
  std::vector<double> buf;
  // Welford keeps the variance accurate for large n.
  double mean = 0.0, m2 = 0.0;
  for (int k = 1; k <= n; ++k) {
    sampler.draw(rng, buf);
    const double d = buf[yi] - mean;
    mean += d / k;
    m2 += d * (buf[yi] - mean);
  }
  return {mean, std::sqrt(m2 / (n - 1) / n)};
}

double exact_discrete_mean(const ScmSpec& spec, const Intervention& iv) {
  check_intervention(spec, iv);
  const size_t k = spec.noise_order.size();
  if (k > 24) throw std::invalid_argument("too many noise terms to enumerate");
  for (const auto& n : spec.noise_order)
    if (spec.noise.at(n).kind != Noise::Kind::Bernoulli)
      throw std::invalid_argument("exact enumeration needs Bernoulli noise only");
  const auto order = spec.graph.topological_order();
  std::map<std::string, double> env;
  double total = 0.0;
  for (std::uint64_t mask = 0; mask < (1ULL << k); ++mask) {
    double p = 1.0;
    for (size_t j = 0; j < k; ++j) {
      const bool on = (mask >> j) & 1ULL;
      const double q = spec.noise.at(spec.noise_order[j]).a;
      p *= on ? q : 1.0 - q;
      env[spec.noise_order[j]] = on ? 1.0 : 0.0;
    }
    if (p == 0.0) continue;
    for (const auto& v : order) {
      auto t = std::find(iv.targets.begin(), iv.targets.end(), v);
      env[v] = (t != iv.targets.end()) ? iv.values[t - iv.targets.begin()] : spec.functions.at(v).eval(env);
    }
    total += p * env[spec.target];
  }
  return total;
}

namespace {

const std::map<std::string, ScmSpec>& registry() {
  static const std::map<std::string, ScmSpec> reg = [] {
    std::map<std::string, ScmSpec> m;
    for (const auto& [name, text] : detail::kEmbeddedBenchmarks)
      m.emplace(std::string(name), parse_scm(std::string(text), std::string(name)));
    return m;
  }();
  return reg;
}

}  // namespace

std::vector<std::string> benchmark_names() {
  return {"chain", "chain_uc", "synthetic", "psa", "synthetic_mab"};
}

const ScmSpec& builtin_benchmark(const std::string& name) {
  auto it = registry().find(name);
  if (it == registry().end()) throw std::invalid_argument("unknown benchmark '" + name + "'");
  return it->second;
}

ScmSpec resolve_scm(const std::string& name_or_path) {
  auto it = registry().find(name_or_path);
  if (it != registry().end()) return it->second;
  return load_scm_file(name_or_path);
}

}  // namespace osco
