#include "multix/eval.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

#include "multix/parallel.hpp"

namespace multix {

namespace {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

struct Box {
  double lo;
  double hi;
  double side() const { return hi - lo; }
};

class SceneSampler {
 public:
  SceneSampler(const SceneSpec& spec, std::uint64_t seed)
      : box_{spec.box_min, spec.box_max}, sigma_(spec.noise_sigma), rng_(seed) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  double coord() { return uniform(box_.lo, box_.hi); }
  double noise() { return sigma_ > 0.0 ? std::normal_distribution<double>(0.0, sigma_)(rng_) : 0.0; }

  Vec3 unit_vector() {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 v;
    do {
      v = Vec3(n(rng_), n(rng_), n(rng_));
    } while (v.norm() < 1e-9);
    return v.normalized();
  }

  /// Draws noisy copies of `clean()` until one lies within 4 sigma of `inst`.
  template <typename Clean>
  std::vector<double> noisy_point(const ModelClassDescriptor& desc, const Instance& inst, Clean clean) {
    while (true) {
      std::vector<double> p = clean();
      for (double& x : p) x += noise();
      if (sigma_ <= 0.0 || distance(desc, inst, p) <= 4.0 * sigma_) return p;
    }
  }

  const Box& box() const { return box_; }

 private:
  Box box_;
  double sigma_;
  Rng rng_;
};

/// Parameter interval of base + t * dir inside the square box.
std::pair<double, double> clip_to_box(const Vec2& base, const Vec2& dir, const Box& box) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 2; ++a) {
    if (std::abs(dir[a]) < 1e-15) continue;
    double lo = (box.lo - base[a]) / dir[a];
    double hi = (box.hi - base[a]) / dir[a];
    if (lo > hi) std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
  }
  return {t0, t1};
}

void add_line(SceneSampler& s, const ModelClassDescriptor& desc, std::size_t count, int label,
              SyntheticScene& scene) {
  Vec2 a, b;
  do {
    a = Vec2(s.coord(), s.coord());
    b = Vec2(s.coord(), s.coord());
  } while ((b - a).norm() < 0.1 * s.box().side());
  const Vec2 dir = (b - a).normalized();
  const Vec2 normal(-dir.y(), dir.x());
  const Instance inst = make_instance(desc, line_params_from_normal(normal.x(), normal.y(), -normal.dot(a)));
  const auto [t0, t1] = clip_to_box(a, dir, s.box());
  for (std::size_t i = 0; i < count; ++i) {
    const auto p = s.noisy_point(desc, inst, [&] {
      const Vec2 q = a + s.uniform(t0, t1) * dir;
      return std::vector<double>{q.x(), q.y()};
    });
    scene.points.push_back(p, label);
  }
  scene.gt_instances.push_back(inst);
}

void add_circle(SceneSampler& s, const ModelClassDescriptor& desc, std::size_t count, int label,
                SyntheticScene& scene) {
  const double diag = s.box().side() * std::numbers::sqrt2;
  const double r = s.uniform(diag / 20.0, diag / 4.0);
  // r <= side / 2, so the whole circle fits in the box.
  const Vec2 c(s.uniform(s.box().lo + r, s.box().hi - r), s.uniform(s.box().lo + r, s.box().hi - r));
  const Instance inst = make_instance(desc, {c.x(), c.y(), r});
  for (std::size_t i = 0; i < count; ++i) {
    const auto p = s.noisy_point(desc, inst, [&] {
      const double t = s.uniform(0.0, 2.0 * std::numbers::pi);
      return std::vector<double>{c.x() + r * std::cos(t), c.y() + r * std::sin(t)};
    });
    scene.points.push_back(p, label);
  }
  scene.gt_instances.push_back(inst);
}

void add_plane(SceneSampler& s, const ModelClassDescriptor& desc, std::size_t count, int label,
               SyntheticScene& scene) {
  Vec3 n;
  Vec3 a;
  do {
    a = Vec3(s.coord(), s.coord(), s.coord());
    const Vec3 b(s.coord(), s.coord(), s.coord());
    const Vec3 c(s.coord(), s.coord(), s.coord());
    n = (b - a).cross(c - a);
  } while (n.norm() < 1e-3 * s.box().side() * s.box().side());
  n.normalize();
  const Instance inst = make_instance(desc, plane_params_from_normal(n.x(), n.y(), n.z(), -n.dot(a)));
  for (std::size_t i = 0; i < count; ++i) {
    const auto p = s.noisy_point(desc, inst, [&] {
      const Vec3 q(s.coord(), s.coord(), s.coord());
      const Vec3 on = q - (n.dot(q - a)) * n;
      return std::vector<double>{on.x(), on.y(), on.z()};
    });
    scene.points.push_back(p, label);
  }
  scene.gt_instances.push_back(inst);
}

void add_cylinder(SceneSampler& s, const ModelClassDescriptor& desc, std::size_t count, int label,
                  SyntheticScene& scene) {
  const double diag = s.box().side() * std::sqrt(3.0);
  const Vec3 c(s.coord(), s.coord(), s.coord());
  const Vec3 d = s.unit_vector();
  const double r = s.uniform(diag / 20.0, diag / 8.0);
  const Instance inst = make_instance(desc, {c.x(), c.y(), c.z(), d.x(), d.y(), d.z(), r});
  Vec3 u = d.unitOrthogonal();
  Vec3 v = d.cross(u);
  const double half = s.box().side() / 2.0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto p = s.noisy_point(desc, inst, [&] {
      const double t = s.uniform(-half, half);
      const double th = s.uniform(0.0, 2.0 * std::numbers::pi);
      const Vec3 q = c + t * d + r * (std::cos(th) * u + std::sin(th) * v);
      return std::vector<double>{q.x(), q.y(), q.z()};
    });
    scene.points.push_back(p, label);
  }
  scene.gt_instances.push_back(inst);
}

void add_homography(SceneSampler& s, const ModelClassDescriptor& desc, std::size_t count, int label,
                    SyntheticScene& scene) {
  const double side = s.box().side();
  const double mid = 0.5 * (s.box().lo + s.box().hi);
  const double angle = s.uniform(-0.3, 0.3);
  const double scale = s.uniform(0.8, 1.2);
  Eigen::Matrix3d h;
  h << scale * std::cos(angle), -scale * std::sin(angle), 0.0, scale * std::sin(angle),
      scale * std::cos(angle), 0.0, s.uniform(-0.2, 0.2) / side, s.uniform(-0.2, 0.2) / side, 1.0;
  // Keep the box center roughly in place, then shift by a random offset.
  const Eigen::Vector3d centre = h * Eigen::Vector3d(mid, mid, 1.0);
  Eigen::Matrix3d shift = Eigen::Matrix3d::Identity();
  shift(0, 2) = mid - centre.x() / centre.z() + s.uniform(-0.1, 0.1) * side;
  shift(1, 2) = mid - centre.y() / centre.z() + s.uniform(-0.1, 0.1) * side;
  h = shift * h;
  h /= h(2, 2);
  const Instance inst = make_instance(
      desc, {h(0, 0), h(0, 1), h(0, 2), h(1, 0), h(1, 1), h(1, 2), h(2, 0), h(2, 1), h(2, 2)});
  for (std::size_t i = 0; i < count; ++i) {
    const auto p = s.noisy_point(desc, inst, [&] {
      const Vec2 x1(s.coord(), s.coord());
      const Vec2 x2 = (h * x1.homogeneous()).hnormalized();
      return std::vector<double>{x1.x(), x1.y(), x2.x(), x2.y()};
    });
    scene.points.push_back(p, label);
  }
  scene.gt_instances.push_back(inst);
}

}  // namespace

std::vector<ClassId> scene_classes(const SceneSpec& spec) {
  std::vector<ClassId> out;
  for (const auto& c : spec.components) {
    if (std::find(out.begin(), out.end(), c.class_id) == out.end()) out.push_back(c.class_id);
  }
  return out;
}

SyntheticScene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  if (!(spec.box_max > spec.box_min)) throw std::invalid_argument("degenerate scene box");
  if (spec.noise_sigma < 0.0) throw std::invalid_argument("noise sigma must be non-negative");
  std::size_t dim = 2;
  if (!spec.components.empty()) {
    dim = describe(spec.components.front().class_id).ambient_dim;
    for (const auto& c : spec.components) {
      if (describe(c.class_id).ambient_dim != dim) {
        throw std::invalid_argument("scene components must share an ambient dimension");
      }
    }
  }
  SyntheticScene scene;
  scene.points = PointSet(dim);
  scene.noise_sigma = spec.noise_sigma;
  scene.outlier_count = spec.outliers;
  scene.box_min = spec.box_min;
  scene.box_max = spec.box_max;

  const double side = spec.box_max - spec.box_min;
  // Homography data live in two 2D views, so the reference box is 2D.
  const std::size_t box_dim = dim == 4 ? 2 : dim;
  const double rep_scale = 0.5 * side * std::sqrt(static_cast<double>(box_dim));
  SceneSampler sampler(spec, seed);
  int label = 0;
  for (const auto& c : spec.components) {
    const ModelClassDescriptor desc = describe(c.class_id, rep_scale);
    switch (c.class_id) {
      case ClassId::Line: add_line(sampler, desc, c.count, label, scene); break;
      case ClassId::Circle: add_circle(sampler, desc, c.count, label, scene); break;
      case ClassId::Plane: add_plane(sampler, desc, c.count, label, scene); break;
      case ClassId::Cylinder: add_cylinder(sampler, desc, c.count, label, scene); break;
      case ClassId::Homography: add_homography(sampler, desc, c.count, label, scene); break;
    }
    ++label;
  }
  std::vector<double> p(dim);
  for (std::size_t i = 0; i < spec.outliers; ++i) {
    for (double& x : p) x = sampler.coord();
    scene.points.push_back(p, kGtOutlier);
  }
  return scene;
}

std::vector<std::vector<std::size_t>> confusion_matrix(const Labeling& output, std::size_t num_output,
                                                       std::span<const int> gt, std::size_t num_gt) {
  if (output.size() != gt.size()) throw std::invalid_argument("labelings differ in length");
  std::vector<std::vector<std::size_t>> c(num_output + 1, std::vector<std::size_t>(num_gt + 1, 0));
  for (std::size_t p = 0; p < output.size(); ++p) {
    const std::size_t row = output[p] == kOutlier ? 0 : static_cast<std::size_t>(output[p]) + 1;
    const std::size_t col = gt[p] == kGtOutlier ? 0 : static_cast<std::size_t>(gt[p]) + 1;
    if (row > num_output || col > num_gt) throw std::invalid_argument("label out of range");
    ++c[row][col];
  }
  return c;
}

std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t rows = cost.size();
  if (rows == 0) return {};
  const std::size_t cols = cost.front().size();
  const std::size_t n = std::max(rows, cols);
  auto at = [&](std::size_t i, std::size_t j) {
    return i < rows && j < cols ? cost[i][j] : 0.0;
  };
  // Shortest augmenting path formulation with potentials (1-based).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(rows, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    if (match[j] != 0 && match[j] - 1 < rows && j - 1 < cols) out[match[j] - 1] = static_cast<int>(j - 1);
  }
  return out;
}

namespace {

/// Optimal instance matching on the instance block of the confusion matrix.
std::vector<int> match_instances(const std::vector<std::vector<std::size_t>>& confusion) {
  const std::size_t num_output = confusion.size() - 1;
  const std::size_t num_gt = confusion.front().size() - 1;
  if (num_output == 0 || num_gt == 0) return std::vector<int>(num_output, -1);
  std::vector<std::vector<double>> cost(num_output, std::vector<double>(num_gt));
  for (std::size_t o = 0; o < num_output; ++o) {
    for (std::size_t g = 0; g < num_gt; ++g) cost[o][g] = -static_cast<double>(confusion[o + 1][g + 1]);
  }
  return hungarian(cost);
}

std::size_t gt_instance_count(const SyntheticScene& scene) { return scene.gt_instances.size(); }

}  // namespace

double misclassification_error(const Labeling& output, std::size_t num_output,
                               std::span<const int> gt, std::size_t num_gt) {
  if (output.empty()) return 0.0;
  const auto c = confusion_matrix(output, num_output, gt, num_gt);
  std::size_t agree = c[0][0];
  const auto match = match_instances(c);
  for (std::size_t o = 0; o < match.size(); ++o) {
    if (match[o] >= 0) agree += c[o + 1][static_cast<std::size_t>(match[o]) + 1];
  }
  return 1.0 - static_cast<double>(agree) / static_cast<double>(output.size());
}

double misclassification_error(const FitResult& result, const SyntheticScene& scene) {
  return misclassification_error(result.labeling, result.instances.size(), scene.points.gt(),
                                 gt_instance_count(scene));
}

InstanceErrors instance_errors(const FitResult& result, const SyntheticScene& scene) {
  const std::size_t num_output = result.instances.size();
  const std::size_t num_gt = gt_instance_count(scene);
  const auto c = confusion_matrix(result.labeling, num_output, scene.points.gt(), num_gt);
  const auto match = match_instances(c);
  std::vector<std::size_t> gt_size(num_gt, 0);
  for (int g : scene.points.gt()) {
    if (g != kGtOutlier) ++gt_size[static_cast<std::size_t>(g)];
  }
  std::size_t true_positives = 0;
  for (std::size_t o = 0; o < match.size(); ++o) {
    if (match[o] < 0) continue;
    const auto g = static_cast<std::size_t>(match[o]);
    if (result.instances[o].class_id == scene.gt_instances[g].class_id &&
        2 * c[o + 1][g + 1] > gt_size[g]) {
      ++true_positives;
    }
  }
  return {num_output - true_positives, num_gt - true_positives};
}

double TrialStats::probability_of(std::size_t count) const {
  const auto it = count_probability.find(count);
  return it == count_probability.end() ? 0.0 : it->second;
}

TrialStats summarize_trials(std::vector<TrialRow> rows) {
  TrialStats stats;
  stats.rows = std::move(rows);
  if (stats.rows.empty()) return stats;
  const double n = static_cast<double>(stats.rows.size());
  std::vector<double> errors;
  std::map<std::size_t, std::size_t> counts;
  for (const TrialRow& r : stats.rows) {
    ++counts[r.instance_count];
    stats.mean_misclassification += r.misclassification / n;
    stats.mean_energy += r.energy / n;
    stats.mean_wall_ms += r.wall_ms / n;
    errors.push_back(r.misclassification);
  }
  for (const auto& [count, hits] : counts) stats.count_probability[count] = static_cast<double>(hits) / n;
  std::sort(errors.begin(), errors.end());
  const std::size_t mid = errors.size() / 2;
  stats.median_misclassification =
      errors.size() % 2 == 1 ? errors[mid] : 0.5 * (errors[mid - 1] + errors[mid]);
  return stats;
}

TrialStats run_trials(const SceneSpec& scene_spec, const FitConfig& config,
                      std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  const auto classes = scene_classes(scene_spec);
  std::vector<TrialRow> rows(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    const SyntheticScene scene = generate_scene(scene_spec, seeds[i]);
    FitConfig cfg = config;
    cfg.seed = seeds[i];
    const auto start = std::chrono::steady_clock::now();
    const FitResult result = multix_fit(scene.points, classes, cfg);
    const auto stop = std::chrono::steady_clock::now();
    TrialRow& row = rows[i];
    row.seed = seeds[i];
    row.instance_count = result.instances.size();
    row.misclassification = misclassification_error(result, scene);
    row.energy = result.final_energy.total;
    row.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    row.errors = instance_errors(result, scene);
  });
  return summarize_trials(std::move(rows));
}

}  // namespace multix
