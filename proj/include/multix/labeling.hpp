#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "multix/models.hpp"
#include "multix/sampling.hpp"

namespace multix {

using Label = std::int32_t;
inline constexpr Label kOutlier = -1;

/// Per-point label: an index into the current instance list, or kOutlier.
using Labeling = std::vector<Label>;

enum class RefitMethod { L2, Weiszfeld };

struct FitConfig {
  /// Outlier threshold and kernel scale per class (pixels or meters).
  ClassTable<double> gamma{2.0, 2.0, 0.10, 0.10, 2.4};
  /// Label-cost weight psi per class; the minimal sample sizes by default.
  ClassTable<double> class_weight{2.0, 3.0, 3.0, 5.0, 4.0};
  double w_g = 0.3;
  std::size_t h_max = 10;
  std::size_t bandwidth_k = 10;
  std::size_t trial_count = 100;
  double initial_multiplier = 2.0;
  std::size_t neighborhood_k = 6;
  std::size_t max_iterations = 25;
  std::uint64_t seed = 0;
  double outlier_cost = 1.0 - std::exp(-0.5);

  bool mode_seeking = true;     // false gives the PEARL alternation
  bool validation = true;
  bool strict_guard = false;    // also guard the first mode-seeking move
  RefitMethod refit = RefitMethod::L2;

  // Informational, filled by resolve_auto_params.
  double w_c = 0.0;                   // ln|P| / h_max
  std::size_t initial_instances = 0;  // initial_multiplier * |P|

  /// Notices produced while resolving defaults.
  std::vector<std::string> notices;

  double gamma_of(ClassId id) const { return gamma[index_of(id)]; }
  double weight_of(ClassId id) const { return class_weight[index_of(id)]; }
};

struct EnergyBreakdown {
  double data = 0.0;
  double smoothness = 0.0;  // number of neighborhood edges with differing labels
  double label_cost = 0.0;  // sum of class weights over the used instances
  double total = 0.0;       // data + w_g * smoothness + w_c * label_cost
};

/// Gaussian-kernelized point-to-instance cost in [0, 1].
double data_cost(std::span<const double> p, const Instance& inst, double gamma);

/// m * ln(|P|) / h_max.
double auto_label_cost(const ModelClassDescriptor& desc, std::size_t num_points, std::size_t h_max);

/// ln(|P|) / h_max; multiplied by a class weight psi = m it gives auto_label_cost.
double label_cost_weight(std::size_t num_points, std::size_t h_max);

/// Throws std::invalid_argument unless `labels` is a valid labeling.
void check_labeling(const Labeling& labels, std::size_t num_points, std::size_t num_instances);

EnergyBreakdown total_energy(const PointSet& points, std::span<const Instance> instances,
                             const Labeling& labels, const NeighborhoodGraph& graph,
                             const FitConfig& config);

struct ExpansionOptions {
  /// Recompute the energy from scratch after every solved move and record the
  /// discrepancy against the min-cut prediction.
  bool verify_moves = false;
  std::size_t max_cycles = 1000;
};

struct ExpansionReport {
  std::size_t cycles = 0;
  std::size_t moves_solved = 0;
  std::size_t moves_skipped = 0;  // ruled out by the improvement bound
  std::size_t moves_accepted = 0;
  double max_move_discrepancy = 0.0;
  double initial_energy = 0.0;
  double final_energy = 0.0;
};

/// Alpha-expansion with Potts smoothness and label costs. Labels are visited in
/// instance order with the outlier label last; cycles repeat until one yields
/// no decrease. The result never has higher energy than `init`.
Labeling alpha_expansion(const PointSet& points, std::span<const Instance> instances,
                         const NeighborhoodGraph& graph, const FitConfig& config,
                         const Labeling& init, const ExpansionOptions& options = {},
                         ExpansionReport* report = nullptr);

/// Best single expansion move from `labels` for label `alpha` (kOutlier allowed):
/// returns the moved labeling, which equals `labels` when no move improves it.
Labeling best_expansion_move(const PointSet& points, std::span<const Instance> instances,
                             const NeighborhoodGraph& graph, const FitConfig& config,
                             const Labeling& labels, Label alpha);

}  // namespace multix
