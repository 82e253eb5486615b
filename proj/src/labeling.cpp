#include "multix/labeling.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

#include "multix/maxflow.hpp"
#include "multix/parallel.hpp"

namespace multix {

namespace {

/// Precomputed unary costs and label weights for one expansion run.
class CostTable {
 public:
  CostTable(const PointSet& points, std::span<const Instance> instances, const FitConfig& config)
      : n_(points.size()), outlier_cost_(config.outlier_cost), costs_(instances.size() * n_) {
    const double wc = label_cost_weight(points.size(), config.h_max);
    label_penalty_.reserve(instances.size());
    for (const Instance& inst : instances) label_penalty_.push_back(wc * config.weight_of(inst.class_id));
    parallel_for(instances.size(), [&](std::size_t l) {
      const double gamma = config.gamma_of(instances[l].class_id);
      for (std::size_t p = 0; p < n_; ++p) costs_[l * n_ + p] = data_cost(points[p], instances[l], gamma);
    });
  }

  double cost(Label l, std::size_t p) const {
    return l == kOutlier ? outlier_cost_ : costs_[static_cast<std::size_t>(l) * n_ + p];
  }
  /// w_c * psi for model labels, 0 for the outlier label.
  double penalty(Label l) const {
    return l == kOutlier ? 0.0 : label_penalty_[static_cast<std::size_t>(l)];
  }
  std::size_t num_labels() const { return label_penalty_.size(); }

 private:
  std::size_t n_;
  double outlier_cost_;
  std::vector<double> costs_;
  std::vector<double> label_penalty_;
};

double energy_of(const CostTable& table, const Labeling& labels, const NeighborhoodGraph& graph,
                 double w_g) {
  double data = 0.0;
  std::vector<char> used(table.num_labels(), 0);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    data += table.cost(labels[p], p);
    if (labels[p] != kOutlier) used[static_cast<std::size_t>(labels[p])] = 1;
  }
  double cut = 0.0;
  for (const auto& [p, q] : graph.edges()) cut += labels[p] != labels[q] ? 1.0 : 0.0;
  double label_cost = 0.0;
  for (std::size_t l = 0; l < used.size(); ++l) {
    if (used[l]) label_cost += table.penalty(static_cast<Label>(l));
  }
  return data + w_g * cut + label_cost;
}

class Expander {
 public:
  Expander(const CostTable& table, const NeighborhoodGraph& graph, double w_g)
      : table_(table), graph_(graph), w_g_(w_g) {}

  /// Lower bound on the energy change of any expansion move towards `alpha`.
  double improvement_bound(const Labeling& labels, const std::vector<std::size_t>& counts,
                           Label alpha) {
    const std::size_t num_labels = table_.num_labels();
    sum_negative_.assign(num_labels + 1, 0.0);
    sum_all_.assign(num_labels + 1, 0.0);
    for (std::size_t p = 0; p < labels.size(); ++p) {
      const Label lp = labels[p];
      if (lp == alpha) continue;
      double discontinuous = 0.0;
      double to_alpha = 0.0;
      for (std::size_t q : graph_.neighbors(p)) {
        if (labels[q] == alpha) to_alpha += 1.0;
        else if (labels[q] != lp) discontinuous += 1.0;
      }
      const double a = table_.cost(alpha, p) - table_.cost(lp, p) -
                       w_g_ * (0.5 * discontinuous + to_alpha);
      const std::size_t slot = lp == kOutlier ? num_labels : static_cast<std::size_t>(lp);
      sum_negative_[slot] += std::min(a, 0.0);
      sum_all_[slot] += a;
    }
    double bound = 0.0;
    if (alpha != kOutlier && counts[static_cast<std::size_t>(alpha)] == 0) bound += table_.penalty(alpha);
    for (std::size_t l = 0; l < num_labels; ++l) {
      if (counts[l] == 0) continue;
      bound += std::min(sum_negative_[l], sum_all_[l] - table_.penalty(static_cast<Label>(l)));
    }
    bound += sum_negative_[num_labels];
    return bound;
  }

  /// Solves the binary expansion problem. Returns the predicted energy and
  /// fills `moved` with the resulting labeling.
  double solve(const Labeling& labels, const std::vector<std::size_t>& counts, Label alpha,
               Labeling& moved) {
    const std::size_t n = labels.size();
    var_of_.assign(n, kNoVar);
    std::size_t num_vars = 0;
    for (std::size_t p = 0; p < n; ++p) {
      if (labels[p] != alpha) var_of_[p] = num_vars++;
    }
    BinaryEnergy energy(num_vars);
    for (std::size_t p = 0; p < n; ++p) {
      if (var_of_[p] == kNoVar) energy.add_constant(table_.cost(alpha, p));
      else energy.add_unary(var_of_[p], table_.cost(labels[p], p), table_.cost(alpha, p));
    }
    for (const auto& [p, q] : graph_.edges()) {
      const std::size_t vp = var_of_[p];
      const std::size_t vq = var_of_[q];
      if (vp != kNoVar && vq != kNoVar) {
        energy.add_pairwise(vp, vq, labels[p] != labels[q] ? w_g_ : 0.0, w_g_, w_g_, 0.0);
      } else if (vp != kNoVar) {
        energy.add_unary(vp, w_g_, 0.0);
      } else if (vq != kNoVar) {
        energy.add_unary(vq, w_g_, 0.0);
      }
    }

    // Label costs. A kept label l pays psi_l unless every one of its points
    // switches to alpha; alpha pays psi_alpha if it is used afterwards.
    const std::size_t num_labels = table_.num_labels();
    label_var_.assign(num_labels, kNoVar);
    for (std::size_t l = 0; l < num_labels; ++l) {
      const double c = table_.penalty(static_cast<Label>(l));
      if (counts[l] == 0 || static_cast<Label>(l) == alpha || c <= 0.0) continue;
      const std::size_t y = energy.add_variable();
      label_var_[l] = y;
      energy.add_constant(c);
      energy.add_unary(y, 0.0, -c);
    }
    std::size_t alpha_var = kNoVar;
    if (alpha != kOutlier) {
      const double c = table_.penalty(alpha);
      if (counts[static_cast<std::size_t>(alpha)] > 0) {
        energy.add_constant(c);
      } else if (c > 0.0) {
        alpha_var = energy.add_variable();
        energy.add_unary(alpha_var, 0.0, c);
      }
    }
    for (std::size_t p = 0; p < n; ++p) {
      if (var_of_[p] == kNoVar) continue;
      if (labels[p] != kOutlier) {
        const std::size_t y = label_var_[static_cast<std::size_t>(labels[p])];
        if (y != kNoVar) {
          const double c = table_.penalty(labels[p]);
          energy.add_pairwise(var_of_[p], y, 0.0, c, 0.0, 0.0);
        }
      }
      if (alpha_var != kNoVar) energy.add_pairwise(var_of_[p], alpha_var, 0.0, 0.0, table_.penalty(alpha), 0.0);
    }

    const double predicted = energy.minimize();
    moved = labels;
    for (std::size_t p = 0; p < n; ++p) {
      if (var_of_[p] != kNoVar && energy.value(var_of_[p]) == 1) moved[p] = alpha;
    }
    return predicted;
  }

 private:
  static constexpr std::size_t kNoVar = std::numeric_limits<std::size_t>::max();
  const CostTable& table_;
  const NeighborhoodGraph& graph_;
  double w_g_;
  std::vector<std::size_t> var_of_;
  std::vector<std::size_t> label_var_;
  std::vector<double> sum_negative_;
  std::vector<double> sum_all_;
};

std::vector<std::size_t> label_counts(const Labeling& labels, std::size_t num_labels) {
  std::vector<std::size_t> counts(num_labels, 0);
  for (Label l : labels) {
    if (l != kOutlier) ++counts[static_cast<std::size_t>(l)];
  }
  return counts;
}

double improvement_tolerance(double energy) { return 1e-12 * std::max(1.0, std::abs(energy)); }

}  // namespace

double data_cost(std::span<const double> p, const Instance& inst, double gamma) {
  const double phi = distance(describe(inst.class_id), inst, p);
  if (!std::isfinite(phi)) return 1.0;
  return 1.0 - std::exp(-(phi * phi) / (2.0 * gamma * gamma));
}

double label_cost_weight(std::size_t num_points, std::size_t h_max) {
  if (h_max == 0) throw std::invalid_argument("h_max must be positive");
  if (num_points == 0) return 0.0;
  return std::log(static_cast<double>(num_points)) / static_cast<double>(h_max);
}

double auto_label_cost(const ModelClassDescriptor& desc, std::size_t num_points, std::size_t h_max) {
  return static_cast<double>(desc.minimal_sample_size) * label_cost_weight(num_points, h_max);
}

void check_labeling(const Labeling& labels, std::size_t num_points, std::size_t num_instances) {
  if (labels.size() != num_points) {
    throw std::invalid_argument("labeling has " + std::to_string(labels.size()) + " entries for " +
                                std::to_string(num_points) + " points");
  }
  for (Label l : labels) {
    if (l != kOutlier && (l < 0 || static_cast<std::size_t>(l) >= num_instances)) {
      throw std::invalid_argument("label " + std::to_string(l) + " out of range");
    }
  }
}

EnergyBreakdown total_energy(const PointSet& points, std::span<const Instance> instances,
                             const Labeling& labels, const NeighborhoodGraph& graph,
                             const FitConfig& config) {
  check_labeling(labels, points.size(), instances.size());
  EnergyBreakdown e;
  std::vector<char> used(instances.size(), 0);
  for (std::size_t p = 0; p < points.size(); ++p) {
    const Label l = labels[p];
    if (l == kOutlier) {
      e.data += config.outlier_cost;
    } else {
      const Instance& inst = instances[static_cast<std::size_t>(l)];
      e.data += data_cost(points[p], inst, config.gamma_of(inst.class_id));
      used[static_cast<std::size_t>(l)] = 1;
    }
  }
  for (const auto& [p, q] : graph.edges()) {
    if (labels[p] != labels[q]) e.smoothness += 1.0;
  }
  for (std::size_t l = 0; l < instances.size(); ++l) {
    if (used[l]) e.label_cost += config.weight_of(instances[l].class_id);
  }
  e.total = e.data + config.w_g * e.smoothness +
            label_cost_weight(points.size(), config.h_max) * e.label_cost;
  return e;
}

Labeling alpha_expansion(const PointSet& points, std::span<const Instance> instances,
                         const NeighborhoodGraph& graph, const FitConfig& config,
                         const Labeling& init, const ExpansionOptions& options,
                         ExpansionReport* report) {
  check_labeling(init, points.size(), instances.size());
  const CostTable table(points, instances, config);
  Expander expander(table, graph, config.w_g);

  ExpansionReport local;
  Labeling labels = init;
  std::vector<std::size_t> counts = label_counts(labels, instances.size());
  double energy = energy_of(table, labels, graph, config.w_g);
  local.initial_energy = energy;

  std::vector<Label> order;
  order.reserve(instances.size() + 1);
  for (std::size_t l = 0; l < instances.size(); ++l) order.push_back(static_cast<Label>(l));
  order.push_back(kOutlier);

  Labeling moved;
  bool improved = true;
  while (improved && local.cycles < options.max_cycles) {
    improved = false;
    ++local.cycles;
    for (Label alpha : order) {
      if (expander.improvement_bound(labels, counts, alpha) >= -improvement_tolerance(energy)) {
        ++local.moves_skipped;
        continue;
      }
      ++local.moves_solved;
      const double predicted = expander.solve(labels, counts, alpha, moved);
      if (predicted >= energy - improvement_tolerance(energy) && !options.verify_moves) continue;
      // Every candidate is re-scored from scratch before it is accepted.
      const double actual = energy_of(table, moved, graph, config.w_g);
      local.max_move_discrepancy = std::max(local.max_move_discrepancy, std::abs(actual - predicted));
      if (actual < energy - improvement_tolerance(energy)) {
        labels.swap(moved);
        counts = label_counts(labels, instances.size());
        energy = actual;
        improved = true;
        ++local.moves_accepted;
      }
    }
  }
  local.final_energy = energy;
  if (report != nullptr) *report = local;
  return labels;
}

Labeling best_expansion_move(const PointSet& points, std::span<const Instance> instances,
                             const NeighborhoodGraph& graph, const FitConfig& config,
                             const Labeling& labels, Label alpha) {
  check_labeling(labels, points.size(), instances.size());
  const CostTable table(points, instances, config);
  Expander expander(table, graph, config.w_g);
  const auto counts = label_counts(labels, instances.size());
  Labeling moved;
  expander.solve(labels, counts, alpha, moved);
  const double before = energy_of(table, labels, graph, config.w_g);
  const double after = energy_of(table, moved, graph, config.w_g);
  return after < before - improvement_tolerance(before) ? moved : labels;
}

}  // namespace multix
