#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "multix/labeling.hpp"
#include "multix/models.hpp"
#include "multix/pipeline.hpp"

namespace multix {

/// Ground-truth label for outlier points.
inline constexpr int kGtOutlier = -1;

struct SceneComponent {
  ClassId class_id = ClassId::Line;
  std::size_t count = 100;  // points sampled on this instance
};

struct SceneSpec {
  std::vector<SceneComponent> components;
  double noise_sigma = 0.0;
  std::size_t outliers = 0;
  /// Axis-aligned box [box_min, box_max]^d. Homography scenes use it for both views.
  double box_min = 0.0;
  double box_max = 100.0;
};

struct SyntheticScene {
  PointSet points;  // carries gt labels
  std::vector<Instance> gt_instances;
  double noise_sigma = 0.0;
  std::size_t outlier_count = 0;
  double box_min = 0.0;
  double box_max = 0.0;
};

/// Random instances inside the box, each sampled uniformly on the model with
/// isotropic Gaussian coordinate noise (draws farther than 4 sigma from the
/// model are redrawn), plus uniform outliers. Components must share an
/// ambient dimension.
SyntheticScene generate_scene(const SceneSpec& spec, std::uint64_t seed);

/// The classes a scene's components use, in first-appearance order.
std::vector<ClassId> scene_classes(const SceneSpec& spec);

/// Confusion matrix between output labels (instances + outlier) and ground
/// truth (instances + outlier); row/column 0 is the outlier class.
std::vector<std::vector<std::size_t>> confusion_matrix(const Labeling& output, std::size_t num_output,
                                                       std::span<const int> gt, std::size_t num_gt);

/// Optimal assignment on a cost matrix (rows <= cols not required).
/// Returns, per row, the matched column or -1.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

/// 1 - agreements / n under the best one-to-one matching of output instances
/// to ground-truth instances, with outliers matched only to outliers.
double misclassification_error(const Labeling& output, std::size_t num_output,
                               std::span<const int> gt, std::size_t num_gt);
double misclassification_error(const FitResult& result, const SyntheticScene& scene);

struct InstanceErrors {
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
};

/// A ground-truth instance counts as found when the optimal matching pairs it
/// with an output instance of the same class that covers more than half of
/// its points.
InstanceErrors instance_errors(const FitResult& result, const SyntheticScene& scene);

struct TrialRow {
  std::uint64_t seed = 0;
  std::size_t instance_count = 0;
  double misclassification = 0.0;
  double energy = 0.0;
  double wall_ms = 0.0;
  InstanceErrors errors;
};

struct TrialStats {
  std::vector<TrialRow> rows;
  std::map<std::size_t, double> count_probability;  // instance count -> frequency
  double mean_misclassification = 0.0;
  double median_misclassification = 0.0;
  double mean_energy = 0.0;
  double mean_wall_ms = 0.0;

  double probability_of(std::size_t count) const;
};

/// One scene and one fit per seed; the fit uses `config` with its seed
/// replaced by the trial seed.
TrialStats run_trials(const SceneSpec& scene_spec, const FitConfig& config,
                      std::span<const std::uint64_t> seeds);

/// Aggregates rows into the histogram and summary statistics.
TrialStats summarize_trials(std::vector<TrialRow> rows);

}  // namespace multix
