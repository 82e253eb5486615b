#include "multix/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "multix/modeseek.hpp"
#include "multix/parallel.hpp"

namespace multix {

namespace {

// Stream offsets derived from the single user seed.
constexpr std::uint64_t kGenerationStream = 1;
constexpr std::uint64_t kValidationStream = 2;

constexpr double kConvergenceTolerance = 1e-9;
constexpr int kWeiszfeldIterations = 10;
constexpr int kValidationRedraws = 100;

std::vector<std::size_t> members_of(const Labeling& labels, Label l) {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels[p] == l) out.push_back(p);
  }
  return out;
}

double kernel_cost_sum(const PointSet& points, std::span<const std::size_t> members,
                       const Instance& inst, double gamma) {
  double s = 0.0;
  for (std::size_t p : members) s += data_cost(points[p], inst, gamma);
  return s;
}

/// Geometric-median style refit: iteratively reweighted least squares with
/// weights 1 / distance.
std::optional<Instance> weiszfeld_refit(const ModelClassDescriptor& desc, const PointSet& points,
                                        std::span<const std::size_t> members, const Instance& start) {
  Instance current = start;
  std::vector<double> weights(members.size());
  const double floor = 1e-9 * std::max(1.0, desc.rep_scale);
  for (int it = 0; it < kWeiszfeldIterations; ++it) {
    for (std::size_t i = 0; i < members.size(); ++i) {
      weights[i] = 1.0 / std::max(distance(desc, current, points[members[i]]), floor);
    }
    auto next = estimate(desc, points, members, weights, &current);
    if (!next) return std::nullopt;
    current = *std::move(next);
  }
  return current;
}

/// Labels for `candidate` (a subset of `previous`): points keep their
/// instance if it survived, otherwise become outliers.
Labeling carry_labels(std::span<const Instance> previous, std::span<const Instance> candidate,
                      const Labeling& labels) {
  std::vector<Label> remap(previous.size(), kOutlier);
  std::size_t next = 0;
  for (std::size_t i = 0; i < previous.size() && next < candidate.size(); ++i) {
    if (previous[i] == candidate[next]) remap[i] = static_cast<Label>(next++);
  }
  Labeling out(labels.size(), kOutlier);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels[p] != kOutlier) out[p] = remap[static_cast<std::size_t>(labels[p])];
  }
  return out;
}

class Stopwatch {
 public:
  /// Milliseconds since the previous lap (or construction).
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

template <typename T>
void require_positive(const std::optional<T>& v, const char* name) {
  if (v && !(*v > T{})) throw InvalidOverride(std::string(name) + " must be positive");
}

}  // namespace

FitConfig resolve_auto_params(const PointSet& points, std::span<const ClassId> classes,
                              const ConfigOverrides& o) {
  FitConfig cfg;
  require_positive(o.gamma, "gamma");
  for (const auto& g : o.class_gamma) require_positive(g, "gamma");
  if (o.w_g && !(*o.w_g >= 0.0)) throw InvalidOverride("w_g must be non-negative");
  require_positive(o.h_max, "h_max");
  require_positive(o.bandwidth_k, "bandwidth_k");
  require_positive(o.trial_count, "trial_count");
  require_positive(o.initial_multiplier, "initial_multiplier");
  require_positive(o.neighborhood_k, "neighborhood_k");
  require_positive(o.max_iterations, "max_iterations");
  if (o.outlier_cost && !(*o.outlier_cost > 0.0 && *o.outlier_cost <= 1.0)) {
    throw InvalidOverride("outlier_cost must lie in (0, 1]");
  }

  if (o.gamma) cfg.gamma.fill(*o.gamma);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (o.class_gamma[c]) cfg.gamma[c] = *o.class_gamma[c];
  }
  if (o.w_g) cfg.w_g = *o.w_g;
  if (o.h_max) {
    cfg.h_max = *o.h_max;
  } else {
    cfg.h_max = kDefaultHMax;
    cfg.notices.push_back("h_max not set; using " + std::to_string(kDefaultHMax));
  }
  if (o.bandwidth_k) cfg.bandwidth_k = *o.bandwidth_k;
  if (o.trial_count) cfg.trial_count = *o.trial_count;
  if (o.initial_multiplier) cfg.initial_multiplier = *o.initial_multiplier;
  if (o.neighborhood_k) cfg.neighborhood_k = *o.neighborhood_k;
  if (o.max_iterations) cfg.max_iterations = *o.max_iterations;
  if (o.seed) cfg.seed = *o.seed;
  if (o.outlier_cost) cfg.outlier_cost = *o.outlier_cost;
  if (o.mode_seeking) cfg.mode_seeking = *o.mode_seeking;
  if (o.validation) cfg.validation = *o.validation;
  if (o.strict_guard) cfg.strict_guard = *o.strict_guard;
  if (o.refit) cfg.refit = *o.refit;
  cfg.w_c = label_cost_weight(points.size(), cfg.h_max);
  cfg.initial_instances = std::max<std::size_t>(
      classes.size(), static_cast<std::size_t>(
                          std::llround(cfg.initial_multiplier * static_cast<double>(points.size()))));
  return cfg;
}

void compact_labels(std::vector<Instance>& instances, Labeling& labels) {
  std::vector<char> used(instances.size(), 0);
  for (Label l : labels) {
    if (l != kOutlier) used[static_cast<std::size_t>(l)] = 1;
  }
  std::vector<Label> remap(instances.size(), kOutlier);
  std::vector<Instance> kept;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (!used[i]) continue;
    remap[i] = static_cast<Label>(kept.size());
    kept.push_back(std::move(instances[i]));
  }
  for (Label& l : labels) {
    if (l != kOutlier) l = remap[static_cast<std::size_t>(l)];
  }
  instances = std::move(kept);
}

std::vector<Instance> refit_all(const PointSet& points, std::span<const Instance> instances,
                                const Labeling& labels, const FitConfig& config,
                                double rep_scale) {
  check_labeling(labels, points.size(), instances.size());
  std::vector<Instance> out(instances.begin(), instances.end());
  std::vector<std::vector<std::size_t>> members(instances.size());
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels[p] != kOutlier) members[static_cast<std::size_t>(labels[p])].push_back(p);
  }
  parallel_for(instances.size(), [&](std::size_t i) {
    const Instance& old = instances[i];
    const ModelClassDescriptor desc = describe(old.class_id, rep_scale);
    if (members[i].size() < desc.minimal_sample_size) return;
    std::optional<Instance> fitted =
        config.refit == RefitMethod::Weiszfeld
            ? weiszfeld_refit(desc, points, members[i], old)
            : estimate(desc, points, members[i], {}, &old);
    if (!fitted) return;
    const double gamma = config.gamma_of(old.class_id);
    if (kernel_cost_sum(points, members[i], *fitted, gamma) <=
        kernel_cost_sum(points, members[i], old, gamma)) {
      out[i] = *std::move(fitted);
    }
  });
  return out;
}

ValidationOutcome validate_instances(const PointSet& points, std::span<const Instance> instances,
                                     const Labeling& labels, const FitConfig& config,
                                     std::uint64_t seed) {
  check_labeling(labels, points.size(), instances.size());
  if (config.trial_count == 0) throw std::invalid_argument("trial count must be positive");
  const double rep_scale = points.half_bbox_diagonal();
  ValidationOutcome out;
  out.mean_distances.assign(instances.size(), std::numeric_limits<double>::infinity());
  std::vector<char> keep(instances.size(), 0);

  parallel_for(instances.size(), [&](std::size_t i) {
    const ModelClassDescriptor desc = describe(instances[i].class_id, rep_scale);
    const auto inliers = members_of(labels, static_cast<Label>(i));
    const std::size_t m = desc.minimal_sample_size;
    if (inliers.size() < m) return;
    Rng rng(derive_seed(seed, i));
    const double t = static_cast<double>(config.trial_count);
    double accumulated = 0.0;
    std::vector<std::size_t> pool = inliers;
    std::vector<std::size_t> sample(m);
    for (std::size_t trial = 0; trial < config.trial_count; ++trial) {
      std::optional<Instance> fit;
      for (int draw = 0; draw < kValidationRedraws && !fit; ++draw) {
        for (std::size_t j = 0; j < m; ++j) {
          std::uniform_int_distribution<std::size_t> pick(j, pool.size() - 1);
          std::swap(pool[j], pool[pick(rng)]);
          sample[j] = pool[j];
        }
        fit = estimate(desc, points, sample);
      }
      if (!fit) {
        accumulated = std::numeric_limits<double>::infinity();
        break;
      }
      double mean = 0.0;
      for (std::size_t p : inliers) mean += distance(desc, *fit, points[p]);
      mean /= static_cast<double>(inliers.size());
      accumulated += mean / t;
    }
    out.mean_distances[i] = accumulated;
    keep[i] = accumulated < config.gamma_of(desc.id) ? 1 : 0;
  });

  out.labeling = labels;
  std::vector<Instance> kept = {instances.begin(), instances.end()};
  for (std::size_t p = 0; p < labels.size(); ++p) {
    if (labels[p] != kOutlier && !keep[static_cast<std::size_t>(labels[p])]) out.labeling[p] = kOutlier;
  }
  for (std::size_t i = 0; i < instances.size(); ++i) out.removed += keep[i] ? 0 : 1;
  // Removed instances no longer own points, so compaction drops them; kept
  // instances always own their inliers.
  compact_labels(kept, out.labeling);
  out.instances = std::move(kept);
  return out;
}

FitResult multix_fit(const PointSet& points, std::span<const ClassId> classes,
                     const FitConfig& config, FitObserver* observer) {
  if (classes.empty()) throw std::invalid_argument("at least one model class is required");
  const double rep_scale = points.half_bbox_diagonal();
  std::vector<ModelClassDescriptor> descs;
  std::size_t max_m = 0;
  for (ClassId id : classes) {
    descs.push_back(describe(id, rep_scale));
    if (descs.back().ambient_dim != points.dim()) {
      throw std::invalid_argument(std::string(class_name(id)) + " needs " +
                                  std::to_string(descs.back().ambient_dim) +
                                  "-dimensional points, got " + std::to_string(points.dim()));
    }
    max_m = std::max(max_m, descs.back().minimal_sample_size);
  }
  const std::size_t n = points.size();
  if (n < std::max<std::size_t>(max_m, 2)) {
    throw InsufficientPoints("need at least " + std::to_string(std::max<std::size_t>(max_m, 2)) +
                             " points, got " + std::to_string(n));
  }

  FitResult result;
  result.config = config;
  Stopwatch clock;
  const NeighborhoodGraph graph = build_neighborhood(points, std::min(config.neighborhood_k, n - 1));
  const auto total = std::max<std::size_t>(
      descs.size(), static_cast<std::size_t>(std::llround(config.initial_multiplier * static_cast<double>(n))));
  std::vector<Instance> instances = generate_initial_instances(
      points, graph, descs, total, derive_seed(config.seed, kGenerationStream));
  result.initial_instances = instances.size();
  result.timings.generation_ms = clock.lap();

  Labeling labels(n, kOutlier);
  bool have_labeling = false;
  double prior_energy = 0.0;

  for (std::size_t iter = 1; iter <= config.max_iterations; ++iter) {
    IterationRecord rec;
    rec.instances_before = instances.size();
    const Labeling labels_before = labels;
    const std::size_t count_before = instances.size();
    bool accepted = false;

    if (config.mode_seeking && !instances.empty()) {
      std::vector<Instance> candidate =
          prune_singletons(median_shift(instances, config.bandwidth_k));
      result.timings.mode_seeking_ms += clock.lap();
      if (candidate != instances) {
        rec.mode_move_attempted = true;
        const Labeling carried = carry_labels(instances, candidate, labels);
        Labeling cand_labels = alpha_expansion(points, candidate, graph, config, carried);
        const double cand_energy = total_energy(points, candidate, cand_labels, graph, config).total;
        rec.energy_candidate = cand_energy;
        if (!have_labeling && config.strict_guard) {
          labels = alpha_expansion(points, instances, graph, config, labels);
          prior_energy = total_energy(points, instances, labels, graph, config).total;
          have_labeling = true;
        }
        rec.energy_prior = prior_energy;
        accepted = !have_labeling || cand_energy <= prior_energy;
        if (observer != nullptr && have_labeling) {
          observer->on_mode_move(instances, candidate, cand_labels, prior_energy, accepted);
        }
        if (accepted) {
          instances = std::move(candidate);
          labels = std::move(cand_labels);
          ++result.mode_moves_accepted;
        } else {
          ++result.mode_moves_rejected;
        }
      }
    }
    if (!accepted) labels = alpha_expansion(points, instances, graph, config, labels);
    rec.mode_move_accepted = accepted;
    result.timings.labeling_ms += clock.lap();

    compact_labels(instances, labels);
    instances = refit_all(points, instances, labels, config, rep_scale);
    result.timings.refit_ms += clock.lap();
    rec.instances_after = instances.size();
    rec.energy = total_energy(points, instances, labels, graph, config);
    result.energy_trace.push_back(rec.energy);
    result.iterations_detail.push_back(rec);
    result.iterations = iter;

    const bool labels_unchanged = !accepted && count_before == instances.size() && labels == labels_before;
    const double decrease = prior_energy - rec.energy.total;
    const bool converged = have_labeling && labels_unchanged &&
                           decrease < kConvergenceTolerance * std::max(1.0, std::abs(prior_energy));
    prior_energy = rec.energy.total;
    have_labeling = true;
    if (converged) break;
  }

  if (config.validation) {
    auto v = validate_instances(points, instances, labels, config,
                                derive_seed(config.seed, kValidationStream));
    instances = std::move(v.instances);
    labels = std::move(v.labeling);
    result.validation_removed = v.removed;
    result.timings.validation_ms = clock.lap();
  }
  result.instances = std::move(instances);
  result.labeling = std::move(labels);
  result.final_energy = total_energy(points, result.instances, result.labeling, graph, config);
  return result;
}

}  // namespace multix
