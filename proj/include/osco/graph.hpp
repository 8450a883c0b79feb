#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

namespace osco {

using VarSet = std::set<std::string>;
using Family = std::set<VarSet>;
using Edge = std::pair<std::string, std::string>;

/// Acyclic directed mixed graph. Directed edges are (parent, child); bidirected
/// edges stand for a hidden common cause and are stored with the smaller name first.
/// Construction does not validate; see validate() in scm.hpp and is_acyclic().
class CausalGraph {
 public:
  CausalGraph() = default;
  explicit CausalGraph(std::vector<std::string> nodes);

  void add_node(const std::string& v);
  void add_edge(const std::string& parent, const std::string& child);
  void add_bidirected(const std::string& a, const std::string& b);

  const std::vector<std::string>& nodes() const { return nodes_; }
  VarSet node_set() const { return VarSet(nodes_.begin(), nodes_.end()); }
  bool has_node(const std::string& v) const;
  const std::set<Edge>& directed() const { return directed_; }
  const std::set<Edge>& bidirected() const { return bidirected_; }

  VarSet parents(const std::string& v) const;
  VarSet parents(const VarSet& vs) const;
  VarSet children(const std::string& v) const;
  VarSet spouses(const std::string& v) const;

  /// Inclusive ancestor / descendant closures over directed edges.
  VarSet ancestors(const VarSet& vs) const;
  VarSet descendants(const VarSet& vs) const;

  bool is_acyclic() const;
  /// Deterministic order: among ready nodes the earliest declared goes first.
  /// Throws std::invalid_argument on a cycle.
  std::vector<std::string> topological_order() const;

  /// Subgraph over `keep`, declared order preserved.
  CausalGraph induced(const VarSet& keep) const;
  /// Drops directed edges out of `vs` (the "underbar" graph).
  CausalGraph without_outgoing(const VarSet& vs) const;

  /// Throws std::invalid_argument naming the first unknown variable.
  void require_known(const VarSet& vs) const;

  bool operator==(const CausalGraph& o) const;

 private:
  std::vector<std::string> nodes_;
  std::set<Edge> directed_;
  std::set<Edge> bidirected_;
};

/// Removes every directed edge into `targets` and every bidirected edge
/// touching them. All nodes are kept.
CausalGraph mutilate(const CausalGraph& g, const VarSet& targets);

std::string to_string(const VarSet& s);
std::string to_string(const Family& f);

/// Parses "{}; {Z}; {X, Z}" into a family of sets.
Family parse_family(const std::string& text);

}  // namespace osco
