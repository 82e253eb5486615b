#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "multix/models.hpp"

namespace multix {

/// Fixed-correspondence Hausdorff distance between canonical representations:
/// the largest distance between corresponding representation points.
/// nullopt when the instances belong to different classes.
std::optional<double> instance_distance(const Instance& a, const Instance& b);

/// Smallest bandwidth handed out for fully duplicated neighborhoods.
inline constexpr double kBandwidthFloor = 1e-12;

/// Per-instance bandwidth: the distance to the k-th nearest same-class
/// instance, or to the farthest one when fewer than k exist.
std::vector<double> adaptive_bandwidths(std::span<const Instance> instances, std::size_t k);

struct ModeClusters {
  std::vector<std::size_t> mode_indices;  // into the input set, ascending
  std::vector<Instance> modes;            // copies of the input elements
  std::vector<std::size_t> assignment;    // input index -> mode position
  std::vector<std::size_t> cardinalities; // per mode
};

/// Median-Shift, run separately per class. Each instance repeatedly jumps to
/// the medoid of its bandwidth window until it reaches a fixed point; the
/// instances sharing a fixed point form a cluster.
ModeClusters median_shift(std::span<const Instance> instances, std::size_t k);

/// Same with caller-supplied bandwidths (one per instance).
ModeClusters median_shift(std::span<const Instance> instances, std::span<const double> bandwidths);

/// Modes supported by at least two instances, in mode order.
std::vector<Instance> prune_singletons(const ModeClusters& clusters);

}  // namespace multix
