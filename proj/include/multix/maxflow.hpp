#pragma once

#include <cstddef>
#include <vector>

namespace multix {

/// Max-flow / min-cut on a directed graph with real capacities (Dinic's
/// blocking-flow augmenting paths). Source side = label 0, sink side = label 1.
class MaxFlow {
 public:
  explicit MaxFlow(std::size_t num_nodes = 0) { reset(num_nodes); }

  void reset(std::size_t num_nodes);
  std::size_t add_node();

  /// Terminal capacities: source -> v and v -> sink.
  void add_terminal(std::size_t v, double cap_source, double cap_sink);
  /// Arc u -> v with capacity `cap` and reverse capacity `rev_cap`.
  void add_edge(std::size_t u, std::size_t v, double cap, double rev_cap = 0.0);

  double solve();

  /// True when v ends on the sink side of the minimum cut (after solve()).
  bool on_sink_side(std::size_t v) const;

  std::size_t num_nodes() const { return num_nodes_; }

 private:
  struct Arc {
    std::size_t to;
    double cap;
  };
  void link(std::size_t u, std::size_t v, double cap, double rev_cap);
  bool bfs();
  double dfs(std::size_t v, double pushed);

  std::size_t num_nodes_ = 0;
  std::size_t source_ = 0, sink_ = 0;
  std::vector<Arc> arcs_;  // arc i and i^1 are mutual reverses
  std::vector<std::vector<std::size_t>> out_;
  std::vector<int> level_;
  std::vector<std::size_t> next_arc_;
  bool solved_ = false;
};

/// Binary energy builder on top of MaxFlow for submodular pairwise terms.
/// Variables take value 0 (source side) or 1 (sink side).
class BinaryEnergy {
 public:
  explicit BinaryEnergy(std::size_t num_vars = 0) : flow_(num_vars) {}

  std::size_t add_variable() { return flow_.add_node(); }
  void add_constant(double c) { constant_ += c; }
  void add_unary(std::size_t v, double e0, double e1);
  /// Requires e00 + e11 <= e01 + e10 (up to rounding).
  void add_pairwise(std::size_t u, std::size_t v, double e00, double e01, double e10, double e11);

  /// Minimum energy; afterwards value(v) gives the minimizer.
  double minimize();
  int value(std::size_t v) const { return flow_.on_sink_side(v) ? 1 : 0; }

 private:
  MaxFlow flow_;
  double constant_ = 0.0;
};

}  // namespace multix
