#include "osco/graph.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "osco/ini.hpp"

namespace osco {

CausalGraph::CausalGraph(std::vector<std::string> nodes) {
  for (auto& v : nodes) add_node(v);
}

void CausalGraph::add_node(const std::string& v) {
  if (!has_node(v)) nodes_.push_back(v);
}

void CausalGraph::add_edge(const std::string& parent, const std::string& child) {
  directed_.emplace(parent, child);
}

void CausalGraph::add_bidirected(const std::string& a, const std::string& b) {
  bidirected_.emplace(std::min(a, b), std::max(a, b));
}

bool CausalGraph::has_node(const std::string& v) const {
  return std::find(nodes_.begin(), nodes_.end(), v) != nodes_.end();
}

VarSet CausalGraph::parents(const std::string& v) const {
  VarSet out;
  for (const auto& [p, c] : directed_)
    if (c == v) out.insert(p);
  return out;
}

VarSet CausalGraph::parents(const VarSet& vs) const {
  VarSet out;
  for (const auto& [p, c] : directed_)
    if (vs.count(c)) out.insert(p);
  return out;
}

VarSet CausalGraph::children(const std::string& v) const {
  VarSet out;
  for (const auto& [p, c] : directed_)
    if (p == v) out.insert(c);
  return out;
}

VarSet CausalGraph::spouses(const std::string& v) const {
  VarSet out;
  for (const auto& [a, b] : bidirected_) {
    if (a == v) out.insert(b);
    if (b == v) out.insert(a);
  }
  return out;
}

VarSet CausalGraph::ancestors(const VarSet& vs) const {
  VarSet out = vs;
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& [p, c] : directed_)
      if (out.count(c) && !out.count(p)) {
        out.insert(p);
        grew = true;
      }
  }
  return out;
}

VarSet CausalGraph::descendants(const VarSet& vs) const {
  VarSet out = vs;
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& [p, c] : directed_)
      if (out.count(p) && !out.count(c)) {
        out.insert(c);
        grew = true;
      }
  }
  return out;
}

std::vector<std::string> CausalGraph::topological_order() const {
  std::map<std::string, int> indeg;
  for (const auto& v : nodes_) indeg[v] = 0;
  for (const auto& [p, c] : directed_) ++indeg[c];
  std::vector<std::string> order;
  std::vector<bool> done(nodes_.size(), false);
  while (order.size() < nodes_.size()) {
    bool progressed = false;
    for (size_t i = 0; i < nodes_.size(); ++i) {
      if (done[i] || indeg[nodes_[i]] != 0) continue;
      done[i] = true;
      order.push_back(nodes_[i]);
      for (const auto& [p, c] : directed_)
        if (p == nodes_[i]) --indeg[c];
      progressed = true;
      break;
    }
    if (!progressed) throw std::invalid_argument("graph has a directed cycle");
  }
  return order;
}

bool CausalGraph::is_acyclic() const {
  for (const auto& [p, c] : directed_)
    if (p == c) return false;
  try {
    topological_order();
  } catch (const std::invalid_argument&) {
    return false;
  }
  return true;
}

CausalGraph CausalGraph::induced(const VarSet& keep) const {
  CausalGraph g;
  for (const auto& v : nodes_)
    if (keep.count(v)) g.add_node(v);
  for (const auto& [p, c] : directed_)
    if (keep.count(p) && keep.count(c)) g.directed_.emplace(p, c);
  for (const auto& [a, b] : bidirected_)
    if (keep.count(a) && keep.count(b)) g.bidirected_.emplace(a, b);
  return g;
}

CausalGraph CausalGraph::without_outgoing(const VarSet& vs) const {
  CausalGraph g = *this;
  std::erase_if(g.directed_, [&](const Edge& e) { return vs.count(e.first) > 0; });
  return g;
}

void CausalGraph::require_known(const VarSet& vs) const {
  for (const auto& v : vs)
    if (!has_node(v)) throw std::invalid_argument("unknown variable '" + v + "'");
}

bool CausalGraph::operator==(const CausalGraph& o) const {
  return node_set() == o.node_set() && directed_ == o.directed_ && bidirected_ == o.bidirected_;
}

CausalGraph mutilate(const CausalGraph& g, const VarSet& targets) {
  g.require_known(targets);
  CausalGraph out(g.nodes());
  for (const auto& [p, c] : g.directed())
    if (!targets.count(c)) out.add_edge(p, c);
  for (const auto& [a, b] : g.bidirected())
    if (!targets.count(a) && !targets.count(b)) out.add_bidirected(a, b);
  return out;
}

std::string to_string(const VarSet& s) {
  std::string out = "{";
  bool first = true;
  for (const auto& v : s) {
    if (!first) out += ",";
    out += v;
    first = false;
  }
  return out + "}";
}

std::string to_string(const Family& f) {
  std::string out = "{";
  bool first = true;
  for (const auto& s : f) {
    if (!first) out += ", ";
    out += to_string(s);
    first = false;
  }
  return out + "}";
}

Family parse_family(const std::string& text) {
  Family out;
  for (const auto& item : split(text, ';')) {
    if (item.size() < 2 || item.front() != '{' || item.back() != '}')
      throw std::invalid_argument("expected '{...}' in family, got '" + item + "'");
    auto names = split(std::string_view(item).substr(1, item.size() - 2), ',');
    out.insert(VarSet(names.begin(), names.end()));
  }
  return out;
}

}  // namespace osco
