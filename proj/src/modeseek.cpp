#include "multix/modeseek.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "multix/parallel.hpp"

namespace multix {

namespace {

// Above this class size neighbor queries go through a vantage-point tree.
constexpr std::size_t kLinearScanLimit = 5000;

double rep_distance(const Instance& a, const Instance& b, std::size_t point_dim) {
  double worst = 0.0;
  for (std::size_t off = 0; off + point_dim <= a.rep.size(); off += point_dim) {
    double sq = 0.0;
    for (std::size_t d = 0; d < point_dim; ++d) {
      const double t = a.rep[off + d] - b.rep[off + d];
      sq += t * t;
    }
    worst = std::max(worst, sq);
  }
  return std::sqrt(worst);
}

/// Instances of one class, addressed by local index.
struct ClassView {
  std::span<const Instance> all;
  std::vector<std::size_t> members;  // global indices
  std::size_t point_dim = 0;

  std::size_t size() const { return members.size(); }
  double dist(std::size_t a, std::size_t b) const {
    return rep_distance(all[members[a]], all[members[b]], point_dim);
  }
};

/// Vantage-point tree over the local indices of a ClassView.
class VpTree {
 public:
  explicit VpTree(const ClassView& view) : view_(view), items_(view.size()) {
    std::iota(items_.begin(), items_.end(), std::size_t{0});
    nodes_.reserve(items_.size());
    root_ = build(0, items_.size());
  }

  /// Distances to the k nearest others of `q` (itself excluded), ascending.
  std::vector<double> knn_distances(std::size_t q, std::size_t k) const {
    std::vector<double> heap;  // max-heap of distances
    double tau = std::numeric_limits<double>::infinity();
    auto visit = [&](auto&& self, int id) -> void {
      if (id < 0) return;
      const Node& n = nodes_[static_cast<std::size_t>(id)];
      const double d = view_.dist(q, n.item);
      if (n.item != q && (heap.size() < k || d < tau)) {
        heap.push_back(d);
        std::push_heap(heap.begin(), heap.end());
        if (heap.size() > k) {
          std::pop_heap(heap.begin(), heap.end());
          heap.pop_back();
        }
        if (heap.size() == k) tau = heap.front();
      }
      if (d < n.radius) {
        self(self, n.inside);
        if (d + tau >= n.radius) self(self, n.outside);
      } else {
        self(self, n.outside);
        if (d - tau <= n.radius) self(self, n.inside);
      }
    };
    visit(visit, root_);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

  /// Local indices within distance r of `q` (inclusive, itself included).
  std::vector<std::size_t> range(std::size_t q, double r) const {
    std::vector<std::size_t> out;
    auto visit = [&](auto&& self, int id) -> void {
      if (id < 0) return;
      const Node& n = nodes_[static_cast<std::size_t>(id)];
      const double d = view_.dist(q, n.item);
      if (d <= r) out.push_back(n.item);
      if (d - r < n.radius) self(self, n.inside);
      if (d + r >= n.radius) self(self, n.outside);
    };
    visit(visit, root_);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    std::size_t item = 0;
    double radius = 0.0;  // inside: d < radius
    int inside = -1, outside = -1;
  };

  int build(std::size_t begin, std::size_t end) {
    if (begin >= end) return -1;
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{items_[begin]});
    if (end - begin == 1) return id;
    const std::size_t vp = items_[begin];
    const std::size_t mid = begin + 1 + (end - begin - 1) / 2;
    std::nth_element(items_.begin() + static_cast<std::ptrdiff_t>(begin + 1),
                     items_.begin() + static_cast<std::ptrdiff_t>(mid),
                     items_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return view_.dist(vp, a) < view_.dist(vp, b); });
    const double radius = view_.dist(vp, items_[mid]);
    // Everything strictly closer than the median radius goes inside.
    const auto split = std::partition(items_.begin() + static_cast<std::ptrdiff_t>(begin + 1),
                                      items_.begin() + static_cast<std::ptrdiff_t>(end),
                                      [&](std::size_t a) { return view_.dist(vp, a) < radius; });
    const auto split_at = static_cast<std::size_t>(split - items_.begin());
    const int inside = build(begin + 1, split_at);
    const int outside = build(split_at, end);
    nodes_[static_cast<std::size_t>(id)].radius = radius;
    nodes_[static_cast<std::size_t>(id)].inside = inside;
    nodes_[static_cast<std::size_t>(id)].outside = outside;
    return id;
  }

  const ClassView& view_;
  std::vector<std::size_t> items_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

std::vector<ClassView> group_by_class(std::span<const Instance> instances) {
  std::map<ClassId, ClassView> groups;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    auto& view = groups[instances[i].class_id];
    view.all = instances;
    view.members.push_back(i);
  }
  std::vector<ClassView> out;
  for (auto& [id, view] : groups) {
    view.point_dim = describe(id).rep_point_dim;
    out.push_back(std::move(view));
  }
  return out;
}

double bandwidth_from_sorted(std::span<const double> sorted_others, std::size_t k) {
  if (sorted_others.empty()) return kBandwidthFloor;
  const double eps = sorted_others.size() >= k ? sorted_others[k - 1] : sorted_others.back();
  return eps > 0.0 ? eps : kBandwidthFloor;
}

/// Medoid of `window` (local indices, ascending): the element minimizing the
/// summed distance to all window members, lowest index on ties.
std::size_t medoid(const ClassView& view, std::span<const std::size_t> window) {
  std::size_t best = window.front();
  double best_sum = std::numeric_limits<double>::infinity();
  bool first = true;
  for (std::size_t a : window) {
    double sum = 0.0;
    for (std::size_t b : window) sum += view.dist(a, b);
    if (first || sum < best_sum - 1e-12 * std::max(1.0, std::abs(best_sum))) {
      first = false;
      best_sum = sum;
      best = a;
    }
  }
  return best;
}

}  // namespace

std::optional<double> instance_distance(const Instance& a, const Instance& b) {
  if (a.class_id != b.class_id) return std::nullopt;
  if (a.rep.size() != b.rep.size()) throw std::invalid_argument("representation size mismatch");
  return rep_distance(a, b, describe(a.class_id).rep_point_dim);
}

std::vector<double> adaptive_bandwidths(std::span<const Instance> instances, std::size_t k) {
  if (k == 0) throw std::invalid_argument("bandwidth neighbor rank k must be positive");
  std::vector<double> eps(instances.size(), kBandwidthFloor);
  for (const ClassView& view : group_by_class(instances)) {
    const std::size_t n = view.size();
    if (n > kLinearScanLimit) {
      const VpTree tree(view);
      parallel_for(n, [&](std::size_t i) {
        eps[view.members[i]] = bandwidth_from_sorted(tree.knn_distances(i, k), k);
      });
      continue;
    }
    parallel_for(n, [&](std::size_t i) {
      std::vector<double> others;
      others.reserve(n);
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) others.push_back(view.dist(i, j));
      }
      double e = kBandwidthFloor;
      if (others.size() >= k) {
        std::nth_element(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k - 1),
                         others.end());
        e = others[k - 1];
      } else if (!others.empty()) {
        e = *std::max_element(others.begin(), others.end());
      }
      eps[view.members[i]] = e > 0.0 ? e : kBandwidthFloor;
    });
  }
  return eps;
}

ModeClusters median_shift(std::span<const Instance> instances, std::size_t k) {
  const auto eps = adaptive_bandwidths(instances, k);
  return median_shift(instances, eps);
}

ModeClusters median_shift(std::span<const Instance> instances, std::span<const double> bandwidths) {
  if (bandwidths.size() != instances.size()) {
    throw std::invalid_argument("one bandwidth per instance is required");
  }
  const std::size_t n_all = instances.size();
  // Global index of the fixed point each instance converges to.
  std::vector<std::size_t> root(n_all);

  for (const ClassView& view : group_by_class(instances)) {
    const std::size_t n = view.size();
    std::vector<std::size_t> next(n);
    const bool use_tree = n > kLinearScanLimit;
    std::optional<VpTree> tree;
    if (use_tree) tree.emplace(view);

    parallel_for(n, [&](std::size_t i) {
      const double eps = bandwidths[view.members[i]];
      std::vector<std::size_t> window;
      if (use_tree) {
        window = tree->range(i, eps);
      } else {
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i || view.dist(i, j) <= eps) window.push_back(j);
        }
      }
      next[i] = medoid(view, window);
    });

    // Resolve the functional graph i -> next[i]. Cycles (possible with
    // asymmetric windows) resolve to their lowest member.
    constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> local_root(n, kUnset);
    std::vector<std::size_t> on_path(n, kUnset);
    for (std::size_t start = 0; start < n; ++start) {
      if (local_root[start] != kUnset) continue;
      std::vector<std::size_t> path;
      std::size_t cur = start;
      while (local_root[cur] == kUnset && on_path[cur] != start) {
        on_path[cur] = start;
        path.push_back(cur);
        cur = next[cur];
      }
      std::size_t r;
      if (local_root[cur] != kUnset) {
        r = local_root[cur];
      } else {
        // cur closes a cycle on the current path.
        r = cur;
        for (std::size_t c = next[cur]; c != cur; c = next[c]) r = std::min(r, c);
      }
      for (std::size_t p : path) local_root[p] = r;
    }
    for (std::size_t i = 0; i < n; ++i) root[view.members[i]] = view.members[local_root[i]];
  }

  ModeClusters out;
  out.mode_indices = root;
  std::sort(out.mode_indices.begin(), out.mode_indices.end());
  out.mode_indices.erase(std::unique(out.mode_indices.begin(), out.mode_indices.end()),
                         out.mode_indices.end());
  std::vector<std::size_t> mode_position(n_all, 0);
  for (std::size_t m = 0; m < out.mode_indices.size(); ++m) {
    mode_position[out.mode_indices[m]] = m;
    out.modes.push_back(instances[out.mode_indices[m]]);
  }
  out.cardinalities.assign(out.mode_indices.size(), 0);
  out.assignment.resize(n_all);
  for (std::size_t i = 0; i < n_all; ++i) {
    out.assignment[i] = mode_position[root[i]];
    ++out.cardinalities[out.assignment[i]];
  }
  return out;
}

std::vector<Instance> prune_singletons(const ModeClusters& clusters) {
  std::vector<Instance> kept;
  for (std::size_t m = 0; m < clusters.modes.size(); ++m) {
    if (clusters.cardinalities[m] >= 2) kept.push_back(clusters.modes[m]);
  }
  return kept;
}

}  // namespace multix
