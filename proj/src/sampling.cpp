#include "multix/sampling.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "multix/parallel.hpp"

namespace multix {

namespace {

constexpr std::size_t kLeafSize = 8;
constexpr int kNapsacAttempts = 100;
constexpr int kSlotAttempts = 100;

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double t = a[d] - b[d];
    s += t * t;
  }
  return s;
}

std::vector<std::size_t> uniform_sample(std::size_t n, std::size_t m, Rng& rng) {
  // Partial Fisher-Yates over a sparse index map would be cheaper for huge n;
  // rejection is fine for the small m used here.
  std::vector<std::size_t> out;
  out.reserve(m);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  while (out.size() < m) {
    const std::size_t i = pick(rng);
    if (std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
  }
  return out;
}

}  // namespace

void NeighborhoodGraph::add_edge(std::size_t a, std::size_t b) {
  if (a == b) return;
  auto& la = adjacency_.at(a);
  if (std::find(la.begin(), la.end(), b) != la.end()) return;
  la.push_back(b);
  adjacency_.at(b).push_back(a);
}

void NeighborhoodGraph::finalize() {
  edges_.clear();
  for (std::size_t i = 0; i < adjacency_.size(); ++i) {
    std::sort(adjacency_[i].begin(), adjacency_[i].end());
    for (std::size_t j : adjacency_[i]) {
      if (i < j) edges_.emplace_back(i, j);
    }
  }
}

KdTree::KdTree(const PointSet& points) : points_(points), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  if (!order_.empty()) build(0, order_.size());
}

int KdTree::build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  // Split on the axis of largest spread at the median.
  const std::size_t dim = points_.dim();
  std::size_t axis = 0;
  double best_spread = -1.0;
  for (std::size_t d = 0; d < dim; ++d) {
    double lo = points_[order_[begin]][d];
    double hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = std::min(lo, points_[order_[i]][d]);
      hi = std::max(hi, points_[order_[i]][d]);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      axis = d;
    }
  }
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::vector<std::size_t> KdTree::nearest(std::size_t query, std::size_t k) const {
  using Entry = std::pair<double, std::size_t>;  // (squared distance, index); max-heap
  std::vector<Entry> heap;
  heap.reserve(k + 1);
  const auto q = points_[query];

  auto offer = [&](std::size_t idx) {
    if (idx == query) return;
    const Entry e{squared_distance(q, points_[idx]), idx};
    if (heap.size() < k) {
      heap.push_back(e);
      std::push_heap(heap.begin(), heap.end());
    } else if (e < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = e;
      std::push_heap(heap.begin(), heap.end());
    }
  };

  auto visit = [&](auto&& self, int node_id) -> void {
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    if (node.left < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) offer(order_[i]);
      return;
    }
    const double delta = q[node.axis] - node.split;
    const int near = delta < 0.0 ? node.left : node.right;
    const int far = delta < 0.0 ? node.right : node.left;
    self(self, near);
    // Equal distances must still be explored for the lower-index tie rule.
    if (heap.size() < k || delta * delta <= heap.front().first) self(self, far);
  };
  if (k > 0 && !nodes_.empty()) visit(visit, 0);

  std::sort_heap(heap.begin(), heap.end());
  std::vector<std::size_t> out;
  out.reserve(heap.size());
  for (const auto& e : heap) out.push_back(e.second);
  return out;
}

NeighborhoodGraph build_neighborhood(const PointSet& points, std::size_t k) {
  if (points.empty()) throw EmptyInput("neighborhood graph needs at least one point");
  const std::size_t n = points.size();
  if (k == 0 || k >= n) {
    throw std::invalid_argument("neighbor count k = " + std::to_string(k) +
                                " must be in [1, " + std::to_string(n) + ")");
  }
  NeighborhoodGraph graph(n);
  const KdTree tree(points);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : tree.nearest(i, k)) graph.add_edge(i, j);
  }
  graph.finalize();
  return graph;
}

std::optional<std::vector<std::size_t>> napsac_sample(const PointSet& points,
                                                      const NeighborhoodGraph& graph,
                                                      std::size_t m, Rng& rng) {
  if (m == 0) throw std::invalid_argument("sample size must be positive");
  if (points.empty()) throw EmptyInput("cannot sample from an empty point set");
  std::uniform_int_distribution<std::size_t> pick_seed(0, points.size() - 1);
  const std::size_t seed = pick_seed(rng);
  const auto nbrs = graph.neighbors(seed);
  if (nbrs.size() + 1 < m) return std::nullopt;

  std::vector<std::size_t> pool(nbrs.begin(), nbrs.end());
  std::vector<std::size_t> out{seed};
  for (std::size_t i = 0; i + 1 < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
    out.push_back(pool[i]);
  }
  return out;
}

std::vector<std::size_t> guided_sample(const PointSet& points, const NeighborhoodGraph& graph,
                                       std::size_t m, Rng& rng) {
  if (m > points.size()) throw std::invalid_argument("sample size exceeds point count");
  for (int attempt = 0; attempt < kNapsacAttempts; ++attempt) {
    if (auto s = napsac_sample(points, graph, m, rng)) return *std::move(s);
  }
  return uniform_sample(points.size(), m, rng);
}

std::vector<Instance> generate_initial_instances(const PointSet& points,
                                                 const NeighborhoodGraph& graph,
                                                 std::span<const ModelClassDescriptor> classes,
                                                 std::size_t total, std::uint64_t seed) {
  if (classes.empty()) throw std::invalid_argument("at least one model class is required");
  if (total < classes.size()) {
    throw std::invalid_argument("hypothesis budget is smaller than the number of classes");
  }
  // Slot -> class, evenly split with the remainder going to earlier classes.
  std::vector<std::size_t> slot_class;
  slot_class.reserve(total);
  const std::size_t base = total / classes.size();
  const std::size_t extra = total % classes.size();
  for (std::size_t c = 0; c < classes.size(); ++c) {
    slot_class.insert(slot_class.end(), base + (c < extra ? 1 : 0), c);
  }

  std::vector<std::optional<Instance>> slots(total);
  parallel_for(total, [&](std::size_t s) {
    const ModelClassDescriptor& desc = classes[slot_class[s]];
    if (points.size() < desc.minimal_sample_size) return;
    Rng rng(derive_seed(seed, s));
    for (int attempt = 0; attempt < kSlotAttempts; ++attempt) {
      const auto sample = guided_sample(points, graph, desc.minimal_sample_size, rng);
      if (auto inst = estimate(desc, points, sample)) {
        slots[s] = std::move(inst);
        return;
      }
    }
  });

  std::vector<Instance> out;
  out.reserve(total);
  for (auto& slot : slots) {
    if (!slot) {
      throw GenerationExhausted("could not produce " + std::to_string(total) +
                                " non-degenerate hypotheses within the attempt budget");
    }
    out.push_back(*std::move(slot));
  }
  return out;
}

}  // namespace multix
