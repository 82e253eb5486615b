#include "multix/maxflow.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <stdexcept>

namespace multix {

namespace {
constexpr double kFlowEpsilon = 1e-12;
}

// Internal node ids: 0 = source, 1 = sink, user node v -> v + 2.

void MaxFlow::reset(std::size_t num_nodes) {
  num_nodes_ = num_nodes;
  source_ = 0;
  sink_ = 1;
  arcs_.clear();
  out_.assign(num_nodes + 2, {});
  solved_ = false;
}

std::size_t MaxFlow::add_node() {
  out_.emplace_back();
  return num_nodes_++;
}

void MaxFlow::add_edge(std::size_t u, std::size_t v, double cap, double rev_cap) {
  if (cap < 0.0 || rev_cap < 0.0) throw std::invalid_argument("negative capacity");
  link(u + 2, v + 2, cap, rev_cap);
}

void MaxFlow::link(std::size_t u, std::size_t v, double cap, double rev_cap) {
  out_[u].push_back(arcs_.size());
  arcs_.push_back({v, cap});
  out_[v].push_back(arcs_.size());
  arcs_.push_back({u, rev_cap});
}

void MaxFlow::add_terminal(std::size_t v, double cap_source, double cap_sink) {
  if (cap_source > 0.0) link(source_, v + 2, cap_source, 0.0);
  if (cap_sink > 0.0) link(v + 2, sink_, cap_sink, 0.0);
}

bool MaxFlow::bfs() {
  level_.assign(out_.size(), -1);
  std::queue<std::size_t> q;
  level_[source_] = 0;
  q.push(source_);
  while (!q.empty()) {
    const std::size_t v = q.front();
    q.pop();
    for (std::size_t id : out_[v]) {
      const Arc& a = arcs_[id];
      if (a.cap > kFlowEpsilon && level_[a.to] < 0) {
        level_[a.to] = level_[v] + 1;
        q.push(a.to);
      }
    }
  }
  return level_[sink_] >= 0;
}

double MaxFlow::dfs(std::size_t v, double pushed) {
  if (v == sink_) return pushed;
  for (std::size_t& i = next_arc_[v]; i < out_[v].size(); ++i) {
    const std::size_t id = out_[v][i];
    Arc& a = arcs_[id];
    if (a.cap <= kFlowEpsilon || level_[a.to] != level_[v] + 1) continue;
    const double got = dfs(a.to, std::min(pushed, a.cap));
    if (got > 0.0) {
      a.cap -= got;
      arcs_[id ^ 1].cap += got;
      return got;
    }
  }
  return 0.0;
}

double MaxFlow::solve() {
  double flow = 0.0;
  while (bfs()) {
    next_arc_.assign(out_.size(), 0);
    while (true) {
      const double f = dfs(source_, std::numeric_limits<double>::infinity());
      if (f <= 0.0) break;
      flow += f;
    }
  }
  // level_ now marks the residual reachability from the source.
  solved_ = true;
  return flow;
}

bool MaxFlow::on_sink_side(std::size_t v) const {
  if (!solved_) throw std::logic_error("min cut queried before solve()");
  return level_[v + 2] < 0;
}

void BinaryEnergy::add_unary(std::size_t v, double e0, double e1) {
  if (e1 >= e0) {
    constant_ += e0;
    flow_.add_terminal(v, e1 - e0, 0.0);
  } else {
    constant_ += e1;
    flow_.add_terminal(v, 0.0, e0 - e1);
  }
}

void BinaryEnergy::add_pairwise(std::size_t u, std::size_t v, double e00, double e01, double e10,
                                double e11) {
  // E = e00 + (e10 - e00) x_u + (e11 - e10) x_v + (e01 + e10 - e00 - e11) (1 - x_u) x_v
  double coupling = e01 + e10 - e00 - e11;
  if (coupling < 0.0) {
    if (coupling < -1e-9 * (1.0 + std::abs(e01) + std::abs(e10))) {
      throw std::invalid_argument("pairwise term is not submodular");
    }
    coupling = 0.0;
  }
  constant_ += e00;
  add_unary(u, 0.0, e10 - e00);
  add_unary(v, 0.0, e11 - e10);
  if (coupling > 0.0) flow_.add_edge(u, v, coupling);
}

double BinaryEnergy::minimize() { return constant_ + flow_.solve(); }

}  // namespace multix
