#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "multix/models.hpp"

namespace multix {

using Rng = std::mt19937_64;

class EmptyInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class GenerationExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Undirected graph over point indices. Adjacency lists are sorted ascending.
class NeighborhoodGraph {
 public:
  NeighborhoodGraph() = default;
  explicit NeighborhoodGraph(std::size_t num_points) : adjacency_(num_points) {}

  /// Adds the undirected edge (a, b); self-loops and duplicates are ignored.
  void add_edge(std::size_t a, std::size_t b);
  /// Sorts adjacency lists and rebuilds the edge list.
  void finalize();

  std::size_t num_points() const { return adjacency_.size(); }
  std::span<const std::size_t> neighbors(std::size_t i) const { return adjacency_[i]; }
  /// Edges as (lower, higher) pairs, sorted.
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }

 private:
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
};

/// Exact k-d tree over a PointSet for k-nearest-neighbor queries.
class KdTree {
 public:
  explicit KdTree(const PointSet& points);

  /// The k nearest points to point `query` (itself excluded), nearest first.
  /// Equal distances are ordered by lower index.
  std::vector<std::size_t> nearest(std::size_t query, std::size_t k) const;

 private:
  struct Node {
    std::size_t begin = 0, end = 0;  // range in order_
    std::size_t axis = 0;
    double split = 0.0;
    int left = -1, right = -1;
  };
  int build(std::size_t begin, std::size_t end);
  const PointSet& points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

/// Symmetric k-NN graph: (p, q) is an edge iff q is among the k nearest of p
/// or p among the k nearest of q.
NeighborhoodGraph build_neighborhood(const PointSet& points, std::size_t k);

/// NAPSAC draw: a uniform seed point plus m - 1 distinct uniform members of
/// its adjacency list. nullopt when the seed has fewer than m - 1 neighbors.
std::optional<std::vector<std::size_t>> napsac_sample(const PointSet& points,
                                                      const NeighborhoodGraph& graph,
                                                      std::size_t m, Rng& rng);

/// Neighborhood-guided draw with the global fallback: up to 100 NAPSAC
/// attempts, then m distinct points uniformly from the whole set.
std::vector<std::size_t> guided_sample(const PointSet& points, const NeighborhoodGraph& graph,
                                       std::size_t m, Rng& rng);

/// Initial hypotheses, split evenly over `classes` (remainder to earlier
/// classes). Slot s draws from its own stream derive_seed(seed, s).
std::vector<Instance> generate_initial_instances(const PointSet& points,
                                                 const NeighborhoodGraph& graph,
                                                 std::span<const ModelClassDescriptor> classes,
                                                 std::size_t total, std::uint64_t seed);

}  // namespace multix
