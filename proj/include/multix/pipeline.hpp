#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "multix/labeling.hpp"
#include "multix/models.hpp"
#include "multix/sampling.hpp"

namespace multix {

class InsufficientPoints : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidOverride : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// User-supplied settings; anything left unset is filled by resolve_auto_params.
struct ConfigOverrides {
  std::optional<double> gamma;                  // applied to every class
  ClassTable<std::optional<double>> class_gamma;
  std::optional<double> w_g;
  std::optional<std::size_t> h_max;
  std::optional<std::size_t> bandwidth_k;
  std::optional<std::size_t> trial_count;
  std::optional<double> initial_multiplier;
  std::optional<std::size_t> neighborhood_k;
  std::optional<std::size_t> max_iterations;
  std::optional<std::uint64_t> seed;
  std::optional<double> outlier_cost;
  std::optional<bool> mode_seeking;
  std::optional<bool> validation;
  std::optional<bool> strict_guard;
  std::optional<RefitMethod> refit;
};

inline constexpr std::size_t kDefaultHMax = 10;

FitConfig resolve_auto_params(const PointSet& points, std::span<const ClassId> classes,
                              const ConfigOverrides& overrides);

/// Per-iteration bookkeeping of the main loop.
struct IterationRecord {
  EnergyBreakdown energy;            // after re-fitting
  std::size_t instances_before = 0;  // entering mode seeking
  std::size_t instances_after = 0;   // after labeling and unused-label removal
  bool mode_move_attempted = false;
  bool mode_move_accepted = false;
  double energy_prior = 0.0;         // energy the guard compared against
  double energy_candidate = 0.0;     // optimal-labeling energy of the mode set
};

struct StageTimings {
  double generation_ms = 0.0;
  double mode_seeking_ms = 0.0;
  double labeling_ms = 0.0;
  double refit_ms = 0.0;
  double validation_ms = 0.0;
};

struct FitResult {
  std::vector<Instance> instances;
  Labeling labeling;
  std::vector<EnergyBreakdown> energy_trace;
  std::vector<IterationRecord> iterations_detail;
  std::size_t iterations = 0;
  std::size_t mode_moves_accepted = 0;
  std::size_t mode_moves_rejected = 0;
  std::size_t validation_removed = 0;
  std::size_t initial_instances = 0;
  EnergyBreakdown final_energy;  // of the returned instances and labeling
  FitConfig config;
  StageTimings timings;
};

/// Observer hooks for tests and diagnostics.
struct FitObserver {
  /// Called whenever the mode-move guard is evaluated.
  virtual void on_mode_move(std::span<const Instance> /*previous*/,
                            std::span<const Instance> /*candidate*/,
                            const Labeling& /*candidate_labels*/, double /*prior_energy*/,
                            bool /*accepted*/) {}
  virtual ~FitObserver() = default;
};

FitResult multix_fit(const PointSet& points, std::span<const ClassId> classes,
                     const FitConfig& config, FitObserver* observer = nullptr);

/// Re-estimates each instance from its assigned points. An instance keeps its
/// parameters when it has fewer than a minimal sample of points or when the
/// new fit would raise the kernelized data cost of its points.
std::vector<Instance> refit_all(const PointSet& points, std::span<const Instance> instances,
                                const Labeling& labels, const FitConfig& config,
                                double rep_scale);

struct ValidationOutcome {
  std::vector<Instance> instances;
  Labeling labeling;
  std::vector<double> mean_distances;  // per input instance; +inf if removed outright
  std::size_t removed = 0;
};

/// Cross-validation pruning: repeatedly fits minimal samples of each
/// instance's inliers and keeps the instance when the averaged mean distance
/// of the inliers to those fits is below the class threshold.
ValidationOutcome validate_instances(const PointSet& points, std::span<const Instance> instances,
                                     const Labeling& labels, const FitConfig& config,
                                     std::uint64_t seed);

/// Drops instances without points and renumbers labels accordingly.
void compact_labels(std::vector<Instance>& instances, Labeling& labels);

}  // namespace multix
