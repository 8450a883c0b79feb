#include "osco/identification.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <stdexcept>

namespace osco {

EstPtr est_factor(std::vector<std::string> outcome, std::vector<std::string> given) {
  auto n = std::make_shared<EstNode>();
  n->kind = EstNode::Kind::Factor;
  n->vars = std::move(outcome);
  n->given = std::move(given);
  return n;
}

EstPtr est_marginal(std::vector<std::string> vars, EstPtr child) {
  if (vars.empty()) return child;
  auto n = std::make_shared<EstNode>();
  n->kind = EstNode::Kind::Marginal;
  n->vars = std::move(vars);
  n->children = {std::move(child)};
  return n;
}

EstPtr est_product(std::vector<EstPtr> children) {
  auto n = std::make_shared<EstNode>();
  n->kind = EstNode::Kind::Product;
  n->children = std::move(children);
  return n;
}

EstPtr est_quotient(EstPtr num, EstPtr den) {
  auto n = std::make_shared<EstNode>();
  n->kind = EstNode::Kind::Quotient;
  n->children = {std::move(num), std::move(den)};
  return n;
}

EstPtr est_fixed(std::vector<std::string> vars, EstPtr child, bool arbitrary) {
  if (vars.empty()) return child;
  auto n = std::make_shared<EstNode>();
  n->kind = EstNode::Kind::Fixed;
  n->vars = std::move(vars);
  n->children = {std::move(child)};
  n->arbitrary = arbitrary;
  return n;
}

// ---------------------------------------------------------------- printing

namespace {

using Scope = std::map<std::string, std::string>;  // variable -> printed symbol

std::string symbol(const Scope& sc, const std::string& v) {
  auto it = sc.find(v);
  return it == sc.end() ? v : it->second;
}

std::string print(const EstPtr& e, Scope sc, bool canonical) {
  switch (e->kind) {
    case EstNode::Kind::Factor: {
      std::vector<std::string> out, given;
      for (const auto& v : e->vars) out.push_back(symbol(sc, v));
      for (const auto& v : e->given) given.push_back(symbol(sc, v));
      if (canonical) {
        std::sort(out.begin(), out.end());
        std::sort(given.begin(), given.end());
      }
      std::string s = "P(";
      for (size_t i = 0; i < out.size(); ++i) s += (i ? "," : "") + out[i];
      if (!given.empty()) {
        s += "|";
        for (size_t i = 0; i < given.size(); ++i) s += (i ? "," : "") + given[i];
      }
      return s + ")";
    }
    case EstNode::Kind::Marginal: {
      std::vector<std::string> names;
      for (const auto& v : e->vars) {
        std::string sym = v;
        auto it = sc.find(v);
        if (it != sc.end()) sym = it->second + "'";
        sc[v] = sym;
        names.push_back(sym);
      }
      if (canonical) std::sort(names.begin(), names.end());
      std::string head = "Σ_";
      if (names.size() == 1) {
        head += names[0];
      } else {
        head += "{";
        for (size_t i = 0; i < names.size(); ++i) head += (i ? "," : "") + names[i];
        head += "}";
      }
      return head + " " + print(e->children[0], sc, canonical);
    }
    case EstNode::Kind::Product: {
      if (e->children.empty()) return "1";
      std::vector<std::string> parts;
      for (const auto& c : e->children) {
        std::string p = print(c, sc, canonical);
        if (c->kind == EstNode::Kind::Marginal && e->children.size() > 1 && c != e->children.back())
          p = "[" + p + "]";
        parts.push_back(p);
      }
      if (canonical) {
        // Marginals go last so the bracketing rule above stays unambiguous.
        std::stable_sort(parts.begin(), parts.end(), [](const std::string& a, const std::string& b) {
          const bool ma = a.rfind("Σ", 0) == 0 || a.rfind("[Σ", 0) == 0;
          const bool mb = b.rfind("Σ", 0) == 0 || b.rfind("[Σ", 0) == 0;
          if (ma != mb) return !ma;
          return a < b;
        });
      }
      std::string s;
      for (size_t i = 0; i < parts.size(); ++i) s += (i ? " " : "") + parts[i];
      return s;
    }
    case EstNode::Kind::Quotient:
      return "(" + print(e->children[0], sc, canonical) + ") / (" + print(e->children[1], sc, canonical) + ")";
    case EstNode::Kind::Fixed:
      for (const auto& v : e->vars) sc[v] = v;
      return print(e->children[0], sc, canonical);
  }
  return {};
}

void collect_vars(const EstPtr& e, VarSet& out) {
  out.insert(e->vars.begin(), e->vars.end());
  out.insert(e->given.begin(), e->given.end());
  for (const auto& c : e->children) collect_vars(c, out);
}

// Variables referenced in `e` that are not bound by a Marginal or Fixed inside it.
VarSet free_vars(const EstPtr& e) {
  VarSet out;
  switch (e->kind) {
    case EstNode::Kind::Factor:
      out.insert(e->vars.begin(), e->vars.end());
      out.insert(e->given.begin(), e->given.end());
      break;
    case EstNode::Kind::Marginal:
    case EstNode::Kind::Fixed: {
      out = free_vars(e->children[0]);
      for (const auto& v : e->vars) out.erase(v);
      break;
    }
    default:
      for (const auto& c : e->children) {
        VarSet f = free_vars(c);
        out.insert(f.begin(), f.end());
      }
  }
  return out;
}

}  // namespace

std::string est_to_string(const EstPtr& e, bool canonical) { return print(e, {}, canonical); }

VarSet est_variables(const EstPtr& e) {
  VarSet out;
  collect_vars(e, out);
  return out;
}

VarSet Estimand::variables() const { return est_variables(root); }
std::string Estimand::to_string() const { return est_to_string(root, false); }
std::string Estimand::canonical() const { return est_to_string(root, true); }

// ------------------------------------------------------------ graph queries

bool d_separated(const CausalGraph& g, const VarSet& a, const VarSet& b, const VarSet& z) {
  g.require_known(a);
  g.require_known(b);
  g.require_known(z);
  for (const auto& v : a)
    if (b.count(v) && !z.count(v)) return false;

  // Latent projection made explicit: one hidden parent per bidirected edge.
  std::vector<Edge> edges(g.directed().begin(), g.directed().end());
  int k = 0;
  for (const auto& [u, v] : g.bidirected()) {
    const std::string h = "\x01latent" + std::to_string(k++);
    edges.emplace_back(h, u);
    edges.emplace_back(h, v);
  }
  VarSet anc = a;
  anc.insert(b.begin(), b.end());
  anc.insert(z.begin(), z.end());
  for (bool grew = true; grew;) {
    grew = false;
    for (const auto& [p, c] : edges)
      if (anc.count(c) && !anc.count(p)) grew = anc.insert(p).second || grew;
  }
  std::map<std::string, VarSet> adj;
  std::map<std::string, VarSet> pa;
  for (const auto& [p, c] : edges) {
    if (!anc.count(p) || !anc.count(c)) continue;
    adj[p].insert(c);
    adj[c].insert(p);
    pa[c].insert(p);
  }
  for (const auto& [c, ps] : pa)
    for (const auto& p1 : ps)
      for (const auto& p2 : ps)
        if (p1 != p2) adj[p1].insert(p2);

  std::deque<std::string> queue;
  VarSet seen;
  for (const auto& v : a)
    if (!z.count(v)) {
      queue.push_back(v);
      seen.insert(v);
    }
  while (!queue.empty()) {
    std::string v = queue.front();
    queue.pop_front();
    if (b.count(v)) return false;
    for (const auto& w : adj[v])
      if (!z.count(w) && seen.insert(w).second) queue.push_back(w);
  }
  return true;
}

std::vector<VarSet> c_components(const CausalGraph& g) {
  std::vector<VarSet> out;
  VarSet assigned;
  for (const auto& v : g.nodes()) {
    if (assigned.count(v)) continue;
    VarSet comp{v};
    std::deque<std::string> queue{v};
    while (!queue.empty()) {
      std::string u = queue.front();
      queue.pop_front();
      for (const auto& w : g.spouses(u))
        if (comp.insert(w).second) queue.push_back(w);
    }
    assigned.insert(comp.begin(), comp.end());
    out.push_back(comp);
  }
  return out;
}

// ------------------------------------------------------------ ID algorithm

namespace {

struct Hedge {
  std::string description;
};

// The distribution an ID call works with: the observational law (marginalised),
// a chain-rule product of conditionals, or a general expression.
struct Dist {
  enum class Form { Observational, Chain, General };
  Form form = Form::Observational;
  VarSet vars;
  std::map<std::string, EstPtr> factors;  // Chain
  EstPtr expr;                            // General
};

class IdSolver {
 public:
  explicit IdSolver(const CausalGraph& g) : order_(g.topological_order()) {}

  EstPtr run(const VarSet& y, const VarSet& x, const Dist& p, const CausalGraph& g) {
    const VarSet v = g.node_set();

    // Line 1: no intervention left.
    if (x.empty()) return est_marginal(ordered(minus(v, y)), joint(p));

    // Line 2: drop non-ancestors of y.
    const VarSet an = g.ancestors(y);
    if (an != v) return run(y, intersect(x, an), marginalize(p, an), g.induced(an));

    // Line 3: add variables with no effect on y once x is fixed.
    const VarSet an_mut = mutilate(g, x).ancestors(y);
    const VarSet w = minus(minus(v, x), an_mut);
    if (!w.empty()) {
      VarSet xw = x;
      xw.insert(w.begin(), w.end());
      return est_fixed(ordered(w), run(y, xw, p, g), true);
    }

    // Line 4: factorise over the c-components of G \ x.
    const auto comps = c_components(g.induced(minus(v, x)));
    if (comps.size() > 1) {
      std::vector<EstPtr> parts;
      for (const auto& s : comps) parts.push_back(run(s, minus(v, s), p, g));
      VarSet yx = y;
      yx.insert(x.begin(), x.end());
      return est_marginal(ordered(minus(v, yx)), est_product(std::move(parts)));
    }

    const VarSet& s = comps.front();
    const auto all = c_components(g);
    // Line 5: hedge.
    if (all.size() == 1 && all.front() == v)
      throw Hedge{"hedge: c-forests " + to_string(v) + " and " + to_string(s) + " for outcome " +
                  to_string(y) + " under do" + to_string(x)};

    // Line 6: s is itself a c-component of G.
    if (std::find(all.begin(), all.end(), s) != all.end()) {
      std::vector<EstPtr> parts;
      for (const auto& vi : ordered(s)) parts.push_back(conditional(p, vi, predecessors(vi, v)));
      return est_marginal(ordered(minus(s, y)), est_product(std::move(parts)));
    }

    // Line 7: s sits strictly inside a larger c-component s2.
    for (const auto& s2 : all) {
      if (!std::includes(s2.begin(), s2.end(), s.begin(), s.end())) continue;
      Dist q;
      q.form = Dist::Form::Chain;
      q.vars = s2;
      for (const auto& vi : ordered(s2)) q.factors[vi] = conditional(p, vi, predecessors(vi, v));
      return run(y, intersect(x, s2), q, g.induced(s2));
    }
    throw std::logic_error("identify: c-component bookkeeping failed");
  }

 private:
  std::vector<std::string> ordered(const VarSet& s) const {
    std::vector<std::string> out;
    for (const auto& v : order_)
      if (s.count(v)) out.push_back(v);
    return out;
  }

  std::vector<std::string> predecessors(const std::string& vi, const VarSet& within) const {
    std::vector<std::string> out;
    for (const auto& v : order_) {
      if (v == vi) break;
      if (within.count(v)) out.push_back(v);
    }
    return out;
  }

  static VarSet minus(const VarSet& a, const VarSet& b) {
    VarSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
    return out;
  }

  static VarSet intersect(const VarSet& a, const VarSet& b) {
    VarSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
    return out;
  }

  EstPtr joint(const Dist& p) const {
    switch (p.form) {
      case Dist::Form::Observational: return est_factor(ordered(p.vars));
      case Dist::Form::Chain: {
        std::vector<EstPtr> parts;
        for (const auto& v : ordered(p.vars)) parts.push_back(p.factors.at(v));
        return est_product(std::move(parts));
      }
      case Dist::Form::General: return p.expr;
    }
    return nullptr;
  }

  // P(vi | preds) where preds are all of p's variables before vi.
  EstPtr conditional(const Dist& p, const std::string& vi, const std::vector<std::string>& preds) const {
    switch (p.form) {
      case Dist::Form::Observational: return est_factor({vi}, preds);
      case Dist::Form::Chain: return p.factors.at(vi);
      case Dist::Form::General: {
        VarSet keep(preds.begin(), preds.end());
        VarSet num_sum = minus(p.vars, keep);
        num_sum.erase(vi);
        const VarSet den_sum = minus(p.vars, keep);
        return est_quotient(est_marginal(ordered(num_sum), p.expr), est_marginal(ordered(den_sum), p.expr));
      }
    }
    return nullptr;
  }

  Dist marginalize(const Dist& p, const VarSet& keep) const {
    Dist out = p;
    out.vars = intersect(p.vars, keep);
    if (p.form == Dist::Form::Observational) return out;
    if (p.form == Dist::Form::General) {
      out.expr = est_marginal(ordered(minus(p.vars, keep)), p.expr);
      return out;
    }
    // Chain: a summed variable that no other factor reads integrates to one.
    std::vector<std::string> order = ordered(p.vars);
    VarSet remaining = p.vars;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if (keep.count(*it)) continue;
      bool read = false;
      for (const auto& other : remaining) {
        if (other == *it) continue;
        const auto& g = out.factors.at(other)->given;
        if (std::find(g.begin(), g.end(), *it) != g.end()) read = true;
      }
      if (read) {
        Dist gen;
        gen.form = Dist::Form::General;
        gen.vars = out.vars;
        Dist chain = p;
        chain.vars = remaining;
        chain.factors = out.factors;
        gen.expr = est_marginal(ordered(minus(remaining, keep)), joint(chain));
        return gen;
      }
      remaining.erase(*it);
      out.factors.erase(*it);
    }
    return out;
  }

  std::vector<std::string> order_;
};

bool valid_adjustment(const CausalGraph& g, const VarSet& x, const std::string& y, const VarSet& z) {
  if (z.count(y)) return false;
  const VarSet de = g.descendants(x);
  for (const auto& v : z)
    if (de.count(v)) return false;
  return d_separated(g.without_outgoing(x), x, {y}, z);
}

std::optional<VarSet> find_adjustment(const CausalGraph& g, const VarSet& x, const std::string& y) {
  VarSet pa = g.parents(x);
  for (const auto& v : x) pa.erase(v);
  if (valid_adjustment(g, x, y, pa)) return pa;

  const VarSet de = g.descendants(x);
  std::vector<std::string> cand;
  for (const auto& v : g.nodes())
    if (!de.count(v) && v != y) cand.push_back(v);
  const size_t n = cand.size();
  if (n > 20) return std::nullopt;
  for (size_t size = 0; size <= n; ++size) {
    // Masks with `size` bits, visited in lexicographic order of declared nodes.
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<long>(size), true);
    do {
      VarSet z;
      for (size_t i = 0; i < n; ++i)
        if (pick[i]) z.insert(cand[i]);
      if (valid_adjustment(g, x, y, z)) return z;
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  return std::nullopt;
}

EstPtr prune_factor(const EstPtr& e, const CausalGraph& g) {
  if (e->given.empty()) return e;
  std::vector<std::string> given = e->given;
  const VarSet out(e->vars.begin(), e->vars.end());
  for (bool changed = true; changed;) {
    changed = false;
    for (size_t i = 0; i < given.size(); ++i) {
      VarSet rest(given.begin(), given.end());
      rest.erase(given[i]);
      if (d_separated(g, out, {given[i]}, rest)) {
        given.erase(given.begin() + static_cast<long>(i));
        changed = true;
        break;
      }
    }
  }
  return est_factor(e->vars, given);
}

std::vector<EstPtr> flatten_product(const EstPtr& e) {
  if (e->kind != EstNode::Kind::Product) return {e};
  std::vector<EstPtr> out;
  for (const auto& c : e->children) {
    auto f = flatten_product(c);
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

EstPtr simplify_rec(const EstPtr& e, const CausalGraph& g) {
  switch (e->kind) {
    case EstNode::Kind::Factor: return prune_factor(e, g);
    case EstNode::Kind::Product: {
      std::vector<EstPtr> kids;
      for (const auto& c : e->children)
        for (const auto& f : flatten_product(simplify_rec(c, g))) kids.push_back(f);
      if (kids.size() == 1) return kids.front();
      return est_product(std::move(kids));
    }
    case EstNode::Kind::Quotient:
      return est_quotient(simplify_rec(e->children[0], g), simplify_rec(e->children[1], g));
    case EstNode::Kind::Fixed: return est_fixed(e->vars, simplify_rec(e->children[0], g), e->arbitrary);
    case EstNode::Kind::Marginal: {
      std::vector<EstPtr> kids = flatten_product(simplify_rec(e->children[0], g));
      std::vector<std::string> vars = e->vars;
      for (bool changed = true; changed;) {
        changed = false;
        for (size_t i = 0; i < vars.size() && !changed; ++i) {
          const std::string& v = vars[i];
          std::vector<size_t> users;
          for (size_t k = 0; k < kids.size(); ++k)
            if (free_vars(kids[k]).count(v)) users.push_back(k);
          if (users.empty()) {
            vars.erase(vars.begin() + static_cast<long>(i));
            changed = true;
            break;
          }
          if (users.size() != 1) continue;
          const EstPtr& f = kids[users[0]];
          if (f->kind != EstNode::Kind::Factor) continue;
          if (std::find(f->given.begin(), f->given.end(), v) != f->given.end()) continue;
          std::vector<std::string> outc;
          for (const auto& o : f->vars)
            if (o != v) outc.push_back(o);
          if (outc.empty()) {
            kids.erase(kids.begin() + static_cast<long>(users[0]));
          } else {
            kids[users[0]] = prune_factor(est_factor(outc, f->given), g);
          }
          vars.erase(vars.begin() + static_cast<long>(i));
          changed = true;
        }
      }
      EstPtr body = kids.size() == 1 ? kids.front() : est_product(kids);
      return est_marginal(vars, body);
    }
  }
  return e;
}

}  // namespace

EstPtr simplify_estimand(const EstPtr& e, const CausalGraph& g) {
  EstPtr cur = e;
  for (int pass = 0; pass < 8; ++pass) {
    EstPtr next = simplify_rec(cur, g);
    if (est_to_string(next, true) == est_to_string(cur, true)) return next;
    cur = next;
  }
  return cur;
}

IdResult identify(const CausalGraph& g, const VarSet& targets, const std::string& outcome,
                  const IdOptions& opts) {
  g.require_known(targets);
  g.require_known({outcome});
  if (targets.count(outcome)) throw std::invalid_argument("outcome is also an intervention target");
  if (!g.is_acyclic()) throw std::invalid_argument("malformed graph: directed cycle");

  IdResult res;
  IdSolver solver(g);
  const std::vector<std::string> order = g.topological_order();
  auto ordered = [&](const VarSet& s) {
    std::vector<std::string> out;
    for (const auto& v : order)
      if (s.count(v)) out.push_back(v);
    return out;
  };

  if (targets.empty()) {
    // Marginal of the full joint, kept unsimplified so every variable stays observed.
    VarSet rest = g.node_set();
    rest.erase(outcome);
    res.estimand = Estimand{est_marginal(ordered(rest), est_factor(order)), outcome, targets};
    return res;
  }

  EstPtr tree;
  try {
    Dist p;
    p.vars = g.node_set();
    tree = solver.run({outcome}, targets, p, g);
  } catch (const Hedge& h) {
    res.witness = h.description;
    return res;
  }

  if (opts.prefer_adjustment) {
    // An empty adjustment set keeps the factorised form, so mediators stay observed.
    if (auto z = find_adjustment(g, targets, outcome); z && !z->empty()) {
      VarSet cond = targets;
      cond.insert(z->begin(), z->end());
      tree = est_marginal(ordered(*z),
                          est_product({est_factor({outcome}, ordered(cond)), est_factor(ordered(*z))}));
    }
  }
  tree = est_fixed(ordered(targets), tree);
  if (opts.simplify) tree = simplify_estimand(tree, g);
  res.estimand = Estimand{tree, outcome, targets};
  return res;
}

VarSet minimal_observation_set(const IdResult& r) {
  if (!r.identifiable()) throw std::invalid_argument("effect is not identifiable: " + r.witness);
  VarSet out = r.estimand->variables();
  out.insert(r.estimand->outcome);
  return out;
}

Family enumerate_mis(const CausalGraph& g, const std::string& outcome, const VarSet& manipulative) {
  g.require_known(manipulative);
  if (manipulative.count(outcome)) throw std::invalid_argument("outcome is manipulative");
  std::vector<std::string> m(manipulative.begin(), manipulative.end());
  if (m.size() > 20) throw std::invalid_argument("too many manipulative variables to enumerate");
  Family out;
  for (std::uint64_t mask = 0; mask < (1ULL << m.size()); ++mask) {
    VarSet x;
    for (size_t i = 0; i < m.size(); ++i)
      if ((mask >> i) & 1ULL) x.insert(m[i]);
    const VarSet an = mutilate(g, x).ancestors({outcome});
    if (std::includes(an.begin(), an.end(), x.begin(), x.end())) out.insert(x);
  }
  return out;
}

namespace {

VarSet muct(const CausalGraph& g, const std::string& y) {
  const CausalGraph h = g.induced(g.ancestors({y}));
  const auto comps = c_components(h);
  VarSet ts{y};
  VarSet queue{y};
  while (!queue.empty()) {
    const std::string q = *queue.begin();
    queue.erase(queue.begin());
    for (const auto& c : comps)
      if (c.count(q)) ts.insert(c.begin(), c.end());
    VarSet de;
    for (const auto& c : comps)
      if (c.count(q)) de = h.descendants(c);
    for (const auto& d : de)
      if (!ts.count(d)) queue.insert(d);
    for (const auto& t : ts) queue.erase(t);
  }
  return ts;
}

std::pair<VarSet, VarSet> muct_ib(const CausalGraph& g, const std::string& y) {
  VarSet ts = muct(g, y);
  VarSet ib = g.parents(ts);
  for (const auto& t : ts) ib.erase(t);
  return {ts, ib};
}

void sub_pomis(const CausalGraph& g, const std::string& y, const std::vector<std::string>& ws, VarSet obs,
               Family& out) {
  for (size_t i = 0; i < ws.size(); ++i) {
    const auto [ts, xs] = muct_ib(mutilate(g, {ws[i]}), y);
    VarSet new_obs = obs;
    new_obs.insert(ws.begin(), ws.begin() + static_cast<long>(i));
    bool clash = false;
    for (const auto& v : xs) clash = clash || new_obs.count(v);
    if (clash) continue;
    out.insert(xs);
    std::vector<std::string> next;
    for (size_t j = i + 1; j < ws.size(); ++j)
      if (ts.count(ws[j])) next.push_back(ws[j]);
    if (!next.empty()) {
      VarSet keep = ts;
      keep.insert(xs.begin(), xs.end());
      sub_pomis(mutilate(g, xs).induced(keep), y, next, new_obs, out);
    }
  }
}

}  // namespace

Family enumerate_pomis(const CausalGraph& g, const std::string& outcome, const VarSet& manipulative) {
  g.require_known(manipulative);
  g.require_known({outcome});
  if (manipulative.count(outcome)) throw std::invalid_argument("outcome is manipulative");
  const CausalGraph h = g.induced(g.ancestors({outcome}));
  const auto [ts, xs] = muct_ib(h, outcome);
  Family raw{xs};
  VarSet keep = ts;
  keep.insert(xs.begin(), xs.end());
  const CausalGraph sub = mutilate(h, xs).induced(keep);
  std::vector<std::string> ws;
  const auto order = sub.topological_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if (ts.count(*it) && *it != outcome) ws.push_back(*it);
  sub_pomis(sub, outcome, ws, {}, raw);

  Family out;
  for (const auto& s : raw) {
    VarSet proj;
    for (const auto& v : s)
      if (manipulative.count(v)) proj.insert(v);
    out.insert(proj);
  }
  return out;
}

}  // namespace osco
