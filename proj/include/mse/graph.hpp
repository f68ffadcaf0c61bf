#ifndef MSE_GRAPH_HPP
#define MSE_GRAPH_HPP

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mse/ingest.hpp"
#include "mse/schema.hpp"

namespace mse {

/// Interaction graph of a loglinear model: nodes are variables, an edge
/// joins every pair occurring together in some term. Register nodes are
/// distinguished so that collapsibility can be judged against register pairs.
struct InteractionGraph {
  std::vector<std::string> nodes;
  std::vector<char> is_register;
  std::vector<std::vector<char>> adj;

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i] == name) return static_cast<int>(i);
    return -1;
  }

  int add_node(const std::string& name, bool reg) {
    const int i = index_of(name);
    if (i >= 0) {
      if (reg) is_register[i] = 1;
      return i;
    }
    nodes.push_back(name);
    is_register.push_back(reg);
    for (auto& row : adj) row.push_back(0);
    adj.emplace_back(nodes.size(), 0);
    return static_cast<int>(nodes.size()) - 1;
  }

  void add_edge(const std::string& u, const std::string& v) {
    const int a = add_node(u, false), b = add_node(v, false);
    if (a == b) throw ModelError("loop edge " + u + " -- " + v);
    adj[a][b] = adj[b][a] = 1;
  }

  void validate() const {
    int regs = 0;
    for (char r : is_register) regs += r;
    if (regs < 2) throw ModelError("interaction graph needs at least two register nodes");
  }
};

/// All induced (chordless) paths between two nodes: simple paths where no
/// two non-consecutive nodes are adjacent. Exhaustive search; the graphs
/// here are tiny.
inline std::vector<std::vector<int>> short_paths(const InteractionGraph& g, int u, int v) {
  const int n = static_cast<int>(g.nodes.size());
  if (u < 0 || v < 0 || u >= n || v >= n) throw ModelError("path endpoint not in graph");
  std::vector<std::vector<int>> paths;
  std::vector<int> path{u};
  std::vector<char> on_path(n, 0);
  on_path[u] = 1;
  const auto extend = [&](auto&& self) -> void {
    const int last = path.back();
    for (int w = 0; w < n; ++w) {
      if (!g.adj[last][w] || on_path[w]) continue;
      bool chord = false;
      for (std::size_t j = 0; j + 1 < path.size() && !chord; ++j) chord = g.adj[path[j]][w];
      if (chord) continue;
      path.push_back(w);
      on_path[w] = 1;
      if (w == v)
        paths.push_back(path);
      else
        self(self);
      on_path[w] = 0;
      path.pop_back();
    }
  };
  extend(extend);
  return paths;
}

inline std::vector<std::vector<int>> short_paths(const InteractionGraph& g, const std::string& u,
                                                 const std::string& v) {
  const int a = g.index_of(u), b = g.index_of(v);
  if (a < 0) throw ModelError("node '" + u + "' not in graph");
  if (b < 0) throw ModelError("node '" + v + "' not in graph");
  return short_paths(g, a, b);
}

/// A covariate can be ignored (the model collapsed over it) unless it sits
/// in the interior of some short path between two registers; the witness
/// path shows why not.
struct CollapseVerdict {
  bool collapsible = true;
  std::vector<int> witness;  // node indices; empty when collapsible

  std::string witness_text(const InteractionGraph& g) const {
    std::string s;
    for (std::size_t i = 0; i < witness.size(); ++i) {
      if (i) s += "-";
      s += g.nodes[witness[i]];
    }
    return s;
  }
};

inline CollapseVerdict is_collapsible(const InteractionGraph& g, int covariate) {
  const int n = static_cast<int>(g.nodes.size());
  if (covariate < 0 || covariate >= n) throw ModelError("covariate node not in graph");
  g.validate();
  for (int u = 0; u < n; ++u) {
    if (!g.is_register[u]) continue;
    for (int v = u + 1; v < n; ++v) {
      if (!g.is_register[v]) continue;
      for (const auto& path : short_paths(g, u, v))
        for (std::size_t j = 1; j + 1 < path.size(); ++j)
          if (path[j] == covariate) return {false, path};
    }
  }
  return {};
}

inline CollapseVerdict is_collapsible(const InteractionGraph& g, const std::string& covariate) {
  const int c = g.index_of(covariate);
  if (c < 0) throw ModelError("node '" + covariate + "' not in graph");
  return is_collapsible(g, c);
}

/// Text format: a "registers:" header naming the register nodes, then one
/// edge per line as "U -- V". Blank lines and "#" comments are skipped.
inline InteractionGraph read_graph(std::istream& in) {
  InteractionGraph g;
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("registers:", 0) == 0) {
      std::stringstream ss(line.substr(10));
      std::string name;
      while (ss >> name) g.add_node(name, true);
      have_header = true;
      continue;
    }
    const auto sep = line.find("--");
    if (sep == std::string::npos)
      throw IngestError("graph line " + std::to_string(lineno) + ": expected 'U -- V'");
    const std::string u = detail::trim(line.substr(0, sep));
    const std::string v = detail::trim(line.substr(sep + 2));
    if (u.empty() || v.empty())
      throw IngestError("graph line " + std::to_string(lineno) + ": empty node name");
    g.add_edge(u, v);
  }
  if (!have_header) throw IngestError("graph file lacks a 'registers:' header");
  g.validate();
  return g;
}

inline InteractionGraph read_graph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path + "'");
  return read_graph(in);
}

}  // namespace mse

#endif  // MSE_GRAPH_HPP
