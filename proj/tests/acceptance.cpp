// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "multix/eval.hpp"
#include "multix/labeling.hpp"
#include "multix/modeseek.hpp"
#include "multix/pipeline.hpp"
#include "oracles.hpp"

using namespace multix;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t n) {
  std::vector<std::uint64_t> s(n);
  std::iota(s.begin(), s.end(), first);
  return s;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

// Three lines of 100 points, 200 outliers, sigma 20, gamma 6, h_max 3.
void three_line_instance_count() {
  SceneSpec spec;
  spec.components = {{ClassId::Line, 100}, {ClassId::Line, 100}, {ClassId::Line, 100}};
  spec.outliers = 200;
  spec.noise_sigma = 20.0;
  spec.box_max = 600.0;
  const auto probe = generate_scene(spec, 1);
  const std::vector<ClassId> classes{ClassId::Line};
  ConfigOverrides o;
  o.gamma = 6.0;
  o.h_max = 3;
  const FitConfig cfg = resolve_auto_params(probe.points, classes, o);
  FitConfig pearl = cfg;
  pearl.mode_seeking = false;

  const auto seeds = seed_range(1, 100);
  const auto start = Clock::now();
  const auto mx = run_trials(spec, cfg, seeds);
  const auto pe = run_trials(spec, pearl, seeds);
  const double secs = seconds_since(start);
  const double p_mx = mx.probability_of(3), p_pe = pe.probability_of(3);
  char buf[256];
  std::snprintf(buf, sizeof buf, "P(3) multix=%.2f pearl=%.2f, mean counts %.2f / %.2f, %.1f s", p_mx, p_pe,
                [&] {
                  double m = 0;
                  for (const auto& r : mx.rows) m += double(r.instance_count) / double(mx.rows.size());
                  return m;
                }(),
                [&] {
                  double m = 0;
                  for (const auto& r : pe.rows) m += double(r.instance_count) / double(pe.rows.size());
                  return m;
                }(),
                secs);
  report(1, p_mx >= 0.5 && p_pe < p_mx && secs < 300.0, buf);
}

struct GuardCheck : FitObserver {
  const PointSet* points = nullptr;
  const NeighborhoodGraph* graph = nullptr;
  const FitConfig* config = nullptr;
  std::size_t violations = 0, accepted = 0;

  void on_mode_move(std::span<const Instance>, std::span<const Instance> candidate, const Labeling& labels,
                    double prior, bool was_accepted) override {
    if (!was_accepted) return;
    ++accepted;
    const double e = total_energy(*points, candidate, labels, *graph, *config).total;
    if (e > prior + 1e-9 * std::max(1.0, std::abs(prior))) ++violations;
  }
};

void energy_monotonicity() {
  std::mt19937_64 rng(2);
  std::size_t violations = 0, scenes = 0, exhausted = 0, accepted = 0;
  for (int t = 0; t < 200; ++t) {
    SceneSpec spec;
    const int family = t % 3;
    const std::size_t count = 1 + rng() % 3;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t per = 30 + rng() % 50;
      if (family == 0) spec.components.push_back({rng() % 2 ? ClassId::Line : ClassId::Circle, per});
      if (family == 1) spec.components.push_back({rng() % 2 ? ClassId::Plane : ClassId::Cylinder, per});
      if (family == 2) spec.components.push_back({ClassId::Homography, per});
    }
    spec.noise_sigma = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    spec.outliers = rng() % 60;
    const auto scene = generate_scene(spec, 1000 + t);
    std::vector<ClassId> classes;
    if (family == 0) classes = {ClassId::Line, ClassId::Circle};
    if (family == 1) classes = {ClassId::Plane, ClassId::Cylinder};
    if (family == 2) classes = {ClassId::Homography};
    ConfigOverrides o;
    o.seed = static_cast<std::uint64_t>(t);
    o.gamma = std::max(0.5, 2.0 * spec.noise_sigma);
    const FitConfig cfg = resolve_auto_params(scene.points, classes, o);
    const auto graph = build_neighborhood(scene.points, cfg.neighborhood_k);
    GuardCheck guard;
    guard.points = &scene.points;
    guard.graph = &graph;
    guard.config = &cfg;
    FitResult r;
    try {
      r = multix_fit(scene.points, classes, cfg, &guard);
    } catch (const GenerationExhausted&) {
      ++exhausted;
      continue;
    }
    ++scenes;
    violations += guard.violations;
    accepted += guard.accepted;
    for (std::size_t i = 1; i < r.energy_trace.size(); ++i) {
      const double prev = r.energy_trace[i - 1].total;
      if (r.energy_trace[i].total > prev + 1e-9 * std::max(1.0, std::abs(prev))) ++violations;
    }
  }
  report(2, violations == 0 && exhausted == 0,
         std::to_string(scenes) + " scenes, " + std::to_string(accepted) + " guarded moves accepted, " +
             std::to_string(violations) + " violations, " + std::to_string(exhausted) + " generation failures");
}

void labeling_optimality() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0), unit(0.0, 1.0);
  std::size_t violations = 0;
  double worst_ratio = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng() % 7;
    const std::size_t labels = 1 + rng() % 2;  // plus the outlier label
    PointSet ps(2);
    for (std::size_t i = 0; i < n; ++i) ps.push_back(std::vector<double>{u(rng), u(rng)});
    std::vector<Instance> inst;
    for (std::size_t l = 0; l < labels; ++l) {
      if (rng() % 2 == 0) {
        const double a = u(rng);
        inst.push_back(make_instance(describe(ClassId::Line, 7.0),
                                     line_params_from_normal(std::cos(a), std::sin(a), -u(rng))));
      } else {
        inst.push_back(make_instance(describe(ClassId::Circle, 7.0), {u(rng), u(rng), 1.0 + u(rng) / 2}));
      }
    }
    const auto graph = build_neighborhood(ps, 1 + rng() % (n - 1));
    const auto edges = graph.edges();
    FitConfig cfg;
    cfg.gamma[index_of(ClassId::Line)] = 0.5 + 3.0 * unit(rng);
    cfg.gamma[index_of(ClassId::Circle)] = 0.5 + 3.0 * unit(rng);
    cfg.w_g = 2.0 * unit(rng);
    cfg.h_max = 1 + rng() % 10;
    Labeling init(n);
    for (auto& x : init) x = static_cast<Label>(rng() % (labels + 1)) - 1;

    const auto out = alpha_expansion(ps, inst, graph, cfg, init);
    const double e = total_energy(ps, inst, out, graph, cfg).total;
    const double opt = oracle::exhaustive_minimum(n, labels, [&](const Labeling& l) {
      return oracle::naive_energy(ps, inst, l, edges, cfg);
    });
    if (opt > 0) worst_ratio = std::max(worst_ratio, e / opt);
    bool ok = e <= 2.0 * opt + 1e-12;
    for (Label a = kOutlier; a < static_cast<Label>(labels); ++a) {
      ok = ok && best_expansion_move(ps, inst, graph, cfg, out, a) == out;
    }
    if (!ok) ++violations;
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "200 instances, %zu violations, worst ratio %.4f", violations, worst_ratio);
  report(3, violations == 0, buf);
}

std::vector<Instance> random_instance_set(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 50.0), jitter(-1.0, 1.0);
  std::vector<std::array<double, 3>> centers(1 + rng() % 5);
  for (auto& c : centers) c = {u(rng), u(rng), 1.0 + u(rng) / 5.0};
  std::vector<Instance> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (rng() % 4 == 0) {
      const double a = u(rng);
      out.push_back(make_instance(describe(ClassId::Line, 10.0),
                                  line_params_from_normal(std::cos(a), std::sin(a), -u(rng))));
    } else {
      const auto& c = centers[rng() % centers.size()];
      const double s = rng() % 3 == 0 ? 5.0 : 0.5;
      out.push_back(make_instance(describe(ClassId::Circle),
                                  {c[0] + s * jitter(rng), c[1] + s * jitter(rng), c[2] + 0.1 * jitter(rng)}));
    }
  }
  return out;
}

void mode_seeking_contracts() {
  std::mt19937_64 rng(4);
  std::size_t membership = 0, size = 0, idempotence = 0;
  for (int t = 0; t < 500; ++t) {
    const auto h = random_instance_set(rng, 1 + rng() % 80);
    const std::size_t k = 1 + rng() % 10;
    const auto mc = median_shift(h, k);
    if (mc.modes.size() > h.size()) ++size;
    for (const auto& m : mc.modes) {
      if (std::find(h.begin(), h.end(), m) == h.end()) {
        ++membership;
        break;
      }
    }
    const auto again = median_shift(mc.modes, k);
    if (again.modes != mc.modes) ++idempotence;
  }
  report(4, membership + size + idempotence == 0,
         "500 sets, violations: membership " + std::to_string(membership) + ", size " + std::to_string(size) +
             ", idempotence " + std::to_string(idempotence));
}

void estimator_oracles() {
  std::mt19937_64 rng(5);
  double worst_residual = 0.0;
  std::size_t degenerate = 0;
  for (ClassId id : {ClassId::Line, ClassId::Circle, ClassId::Plane, ClassId::Cylinder, ClassId::Homography}) {
    const auto desc = describe(id, 10.0);
    for (int t = 0; t < 200; ++t) {
      const auto sample = oracle::random_minimal_sample(id, rng);
      const auto inst = estimate(desc, sample, iota_indices(sample.size()));
      if (!inst) {
        ++degenerate;
        continue;
      }
      for (std::size_t i = 0; i < sample.size(); ++i) {
        worst_residual = std::max(worst_residual, distance(desc, *inst, sample[i]));
      }
    }
  }
  double worst_excess = 0.0;
  for (int t = 0; t < 50; ++t) {
    const ClassId id = t % 2 == 0 ? ClassId::Line : ClassId::Plane;
    const auto desc = describe(id, 10.0);
    const auto ps = oracle::noisy_points_on_random_model(id, 30 + rng() % 70, 0.5, rng);
    const auto fit = estimate(desc, ps, iota_indices(ps.size()));
    if (!fit) {
      worst_excess = std::numeric_limits<double>::infinity();
      continue;
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) sse += std::pow(distance(desc, *fit, ps[i]), 2);
    const double ref = id == ClassId::Line ? oracle::grid_tls_line(ps).sse : oracle::grid_tls_plane_sse(ps);
    worst_excess = std::max(worst_excess, sse / ref - 1.0);
  }
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "max minimal-sample residual %.3g (%zu degenerate draws skipped), worst TLS excess %.3g%%",
                worst_residual, degenerate, 100.0 * worst_excess);
  report(5, worst_residual <= 1e-9 && worst_excess <= 0.01, buf);
}

void line_circle_scenes() {
  SceneSpec spec;
  spec.components = {{ClassId::Line, 50}, {ClassId::Line, 50}, {ClassId::Circle, 50}};
  spec.noise_sigma = 1.0;
  spec.outliers = 50;
  const auto probe = generate_scene(spec, 1);
  const std::vector<ClassId> classes{ClassId::Line, ClassId::Circle};
  ConfigOverrides o;
  o.gamma = 2.0;
  const FitConfig cfg = resolve_auto_params(probe.points, classes, o);
  std::size_t exact = 0;
  double mean_err = 0.0;
  const auto seeds = seed_range(1, 50);
  std::vector<TrialRow> rows(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto scene = generate_scene(spec, seeds[i]);
    FitConfig c = cfg;
    c.seed = seeds[i];
    const auto r = multix_fit(scene.points, classes, c);
    const auto e = instance_errors(r, scene);
    if (e.false_positives + e.false_negatives == 0) ++exact;
    mean_err += misclassification_error(r, scene) / double(seeds.size());
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "FP+FN=0 in %zu/50 runs, mean misclassification %.1f%%", exact, 100.0 * mean_err);
  report(6, exact >= 40 && mean_err < 0.05, buf);
}

void validation_behavior() {
  FitConfig cfg;
  std::size_t planted_kept = 0, scatter_removed = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    // Planted: inliers exactly on a random line or circle.
    const ClassId id = seed % 2 == 0 ? ClassId::Line : ClassId::Circle;
    auto ps = oracle::noisy_points_on_random_model(id, 20 + seed % 60, 0.0, rng);
    const auto desc = describe(id, ps.half_bbox_diagonal());
    const std::vector<Instance> planted{*estimate(desc, ps, iota_indices(ps.size()))};
    const auto kept = validate_instances(ps, planted, Labeling(ps.size(), 0), cfg, seed);
    if (kept.removed == 0) ++planted_kept;

    PointSet scatter(2);
    for (int i = 0; i < 50; ++i) scatter.push_back(std::vector<double>{u(rng), u(rng)});
    const auto ld = describe(ClassId::Line, scatter.half_bbox_diagonal());
    const std::vector<Instance> fit{*estimate(ld, scatter, iota_indices(scatter.size()))};
    const auto v = validate_instances(scatter, fit, Labeling(scatter.size(), 0), cfg, seed);
    if (v.removed == 1) ++scatter_removed;
  }
  report(7, planted_kept == 100 && scatter_removed >= 95,
         "planted kept " + std::to_string(planted_kept) + "/100, scatter removed " +
             std::to_string(scatter_removed) + "/100");
}

void timing_sanity() {
  SceneSpec spec;
  spec.components = {{ClassId::Line, 150}, {ClassId::Line, 150}, {ClassId::Circle, 150}};
  spec.noise_sigma = 1.0;
  spec.outliers = 50;
  const auto probe = generate_scene(spec, 1);
  const std::vector<ClassId> classes{ClassId::Line, ClassId::Circle};
  ConfigOverrides o;
  o.gamma = 2.0;
  FitConfig cfg = resolve_auto_params(probe.points, classes, o);
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto scene = generate_scene(spec, seed);
    cfg.seed = seed;
    const auto start = Clock::now();
    (void)multix_fit(scene.points, classes, cfg);
    total += seconds_since(start);
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu points, mean %.3f s per fit", probe.points.size(), total / 10.0);
  report(8, total / 10.0 < 10.0, buf);
}

}  // namespace

int main() {
  three_line_instance_count();
  energy_monotonicity();
  labeling_optimality();
  mode_seeking_contracts();
  estimator_oracles();
  line_circle_scenes();
  validation_behavior();
  timing_sanity();
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
