#include <doctest.h>

#include <numeric>
#include <random>

#include "multix/eval.hpp"
#include "multix/pipeline.hpp"
#include "oracles.hpp"

using namespace multix;

namespace {

SceneSpec random_spec(std::mt19937_64& rng) {
  SceneSpec spec;
  const int family = static_cast<int>(rng() % 3);
  const std::size_t count = 1 + rng() % 3;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t per = 20 + rng() % 40;
    if (family == 0) spec.components.push_back({rng() % 2 ? ClassId::Line : ClassId::Circle, per});
    if (family == 1) spec.components.push_back({rng() % 2 ? ClassId::Plane : ClassId::Cylinder, per});
    if (family == 2) spec.components.push_back({ClassId::Homography, per});
  }
  spec.noise_sigma = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
  spec.outliers = rng() % 40;
  return spec;
}

FitConfig config_for(const PointSet& ps, std::span<const ClassId> classes, std::uint64_t seed) {
  ConfigOverrides o;
  o.seed = seed;
  o.gamma = 2.0;
  return resolve_auto_params(ps, classes, o);
}

struct GuardRecorder : FitObserver {
  const PointSet* points = nullptr;
  const NeighborhoodGraph* graph = nullptr;
  const FitConfig* config = nullptr;
  std::size_t calls = 0, violations = 0, accepted = 0;

  void on_mode_move(std::span<const Instance> previous, std::span<const Instance> candidate,
                    const Labeling& candidate_labels, double prior_energy, bool was_accepted) override {
    ++calls;
    if (candidate.size() > previous.size()) ++violations;
    const double e = total_energy(*points, candidate, candidate_labels, *graph, *config).total;
    if (was_accepted) {
      ++accepted;
      if (e > prior_energy + 1e-9 * std::max(1.0, std::abs(prior_energy))) ++violations;
    } else if (e <= prior_energy) {
      ++violations;
    }
  }
};

}  // namespace

TEST_CASE("automatic parameters") {
  std::mt19937_64 rng(1);
  PointSet ps(2);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int i = 0; i < 500; ++i) ps.push_back(std::vector<double>{u(rng), u(rng)});
  const std::vector<ClassId> line{ClassId::Line};

  const auto cfg = resolve_auto_params(ps, line, {});
  CHECK(cfg.gamma_of(ClassId::Line) == 2.0);
  CHECK(cfg.w_g == 0.3);
  CHECK(cfg.trial_count == 100);
  CHECK(cfg.initial_instances == 1000);
  CHECK(cfg.h_max == kDefaultHMax);
  CHECK(cfg.w_c == doctest::Approx(std::log(500.0) / 10.0));
  CHECK_FALSE(cfg.notices.empty());

  ConfigOverrides o;
  o.gamma = 6.0;
  const auto six = resolve_auto_params(ps, line, o);
  CHECK(six.gamma_of(ClassId::Line) == 6.0);
  FitConfig expected = cfg;
  expected.gamma = six.gamma;
  CHECK(six.w_g == expected.w_g);
  CHECK(six.h_max == expected.h_max);
  CHECK(six.trial_count == expected.trial_count);
  CHECK(six.bandwidth_k == expected.bandwidth_k);
  CHECK(six.w_c == expected.w_c);
  CHECK(six.initial_instances == expected.initial_instances);

  ConfigOverrides h;
  h.h_max = 3;
  const auto h3 = resolve_auto_params(ps, line, h);
  CHECK(h3.notices.empty());
  CHECK(h3.w_c == doctest::Approx(std::log(500.0) / 3.0));

  ConfigOverrides bad;
  bad.gamma = -1.0;
  CHECK_THROWS_AS(resolve_auto_params(ps, line, bad), InvalidOverride);
  ConfigOverrides zero;
  zero.h_max = 0;
  CHECK_THROWS_AS(resolve_auto_params(ps, line, zero), InvalidOverride);
  ConfigOverrides oc;
  oc.outlier_cost = 1.5;
  CHECK_THROWS_AS(resolve_auto_params(ps, line, oc), InvalidOverride);
}

TEST_CASE("noise-free single line") {
  PointSet ps(2);
  for (int i = 0; i < 50; ++i) ps.push_back(std::vector<double>{2.0 * i, 0.5 * i + 3.0}, 0);
  const std::vector<ClassId> line{ClassId::Line};
  const auto cfg = config_for(ps, line, 3);
  const auto r = multix_fit(ps, line, cfg);
  REQUIRE(r.instances.size() == 1);
  CHECK(std::count(r.labeling.begin(), r.labeling.end(), kOutlier) == 0);
  CHECK(misclassification_error(r.labeling, 1, ps.gt(), 1) == 0.0);
}

TEST_CASE("refit keeps the instance count and never raises the energy") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 40; ++t) {
    auto spec = random_spec(rng);
    const auto scene = generate_scene(spec, 100 + t);
    const auto classes = scene_classes(spec);
    const auto cfg = config_for(scene.points, classes, t);
    const double rs = scene.points.half_bbox_diagonal();
    const auto graph = build_neighborhood(scene.points, cfg.neighborhood_k);

    // Start from the ground truth, perturbed, with the ground-truth labels.
    std::vector<Instance> inst;
    for (const auto& g : scene.gt_instances) {
      auto params = g.params;
      for (double& p : params) p += 0.01 * std::normal_distribution<double>(0.0, 1.0)(rng) * std::max(1.0, std::abs(p));
      const auto desc = describe(g.class_id, rs);
      try {
        inst.push_back(make_instance(desc, params));
      } catch (const NonCanonicalizable&) {
        inst.push_back(make_instance(desc, g.params));
      }
    }
    Labeling labels(scene.points.gt().begin(), scene.points.gt().end());
    // An extra instance with no points stays untouched.
    inst.push_back(inst.front());
    const auto before = total_energy(scene.points, inst, labels, graph, cfg);
    const auto after_inst = refit_all(scene.points, inst, labels, cfg, rs);
    REQUIRE(after_inst.size() == inst.size());
    CHECK(after_inst.back() == inst.back());
    const auto after = total_energy(scene.points, after_inst, labels, graph, cfg);
    CHECK(after.data <= before.data + 1e-9);
    CHECK(after.total <= before.total + 1e-9);
  }
}

TEST_CASE("line refit reduces the squared residual") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    const auto ps = oracle::noisy_points_on_random_model(ClassId::Line, 100, 1.0, rng);
    const auto desc = describe(ClassId::Line, ps.half_bbox_diagonal());
    const std::vector<std::size_t> s{0, 1};
    const auto start = estimate(desc, ps, s);
    if (!start) continue;
    const std::vector<Instance> inst{*start};
    FitConfig cfg;
    cfg.gamma[index_of(ClassId::Line)] = 1e6;  // kernel close to quadratic
    const Labeling labels(ps.size(), 0);
    const auto refit = refit_all(ps, inst, labels, cfg, ps.half_bbox_diagonal());
    double sse_before = 0.0, sse_after = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      sse_before += std::pow(distance(desc, inst[0], ps[i]), 2);
      sse_after += std::pow(distance(desc, refit[0], ps[i]), 2);
    }
    CHECK(sse_after <= sse_before + 1e-9);
  }
}

TEST_CASE("validation keeps exact instances and drops fits to scatter") {
  PointSet exact(2);
  for (int i = 0; i < 40; ++i) exact.push_back(std::vector<double>{double(i), 3.0 * i - 2.0});
  const auto desc = describe(ClassId::Line, exact.half_bbox_diagonal());
  const std::vector<std::size_t> s{0, 39};
  const std::vector<Instance> line{*estimate(desc, exact, s)};
  FitConfig cfg;
  const auto kept = validate_instances(exact, line, Labeling(40, 0), cfg, 1);
  CHECK(kept.instances.size() == 1);
  CHECK(kept.removed == 0);
  CHECK(kept.mean_distances[0] < 1e-9);

  std::size_t removed = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    PointSet scatter(2);
    for (int i = 0; i < 60; ++i) scatter.push_back(std::vector<double>{u(rng), u(rng)});
    const auto d = describe(ClassId::Line, scatter.half_bbox_diagonal());
    std::vector<std::size_t> all(scatter.size());
    std::iota(all.begin(), all.end(), 0);
    const std::vector<Instance> fit{*estimate(d, scatter, all)};
    const auto v = validate_instances(scatter, fit, Labeling(scatter.size(), 0), cfg, seed);
    removed += v.removed;
    if (v.removed == 1) CHECK(v.labeling == Labeling(scatter.size(), kOutlier));
  }
  CHECK(removed >= 95);

  // Too few inliers for a single trial.
  Labeling one(40, kOutlier);
  one[3] = 0;
  const auto lonely = validate_instances(exact, line, one, cfg, 1);
  CHECK(lonely.removed == 1);
  CHECK(std::isinf(lonely.mean_distances[0]));
}

TEST_CASE("energy trace, guard and determinism on random scenes") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 25; ++t) {
    auto spec = random_spec(rng);
    const auto scene = generate_scene(spec, 500 + t);
    const auto classes = scene_classes(spec);
    const auto cfg = config_for(scene.points, classes, t);
    const auto graph = build_neighborhood(scene.points, cfg.neighborhood_k);
    GuardRecorder guard;
    guard.points = &scene.points;
    guard.graph = &graph;
    guard.config = &cfg;

    FitResult r;
    try {
      r = multix_fit(scene.points, classes, cfg, &guard);
    } catch (const GenerationExhausted&) {
      continue;
    }
    CHECK(guard.violations == 0);
    CHECK(r.iterations <= cfg.max_iterations);
    CHECK(r.energy_trace.size() == r.iterations);
    for (std::size_t i = 1; i < r.energy_trace.size(); ++i) {
      const double prev = r.energy_trace[i - 1].total;
      CHECK(r.energy_trace[i].total <= prev + 1e-9 * std::max(1.0, std::abs(prev)));
    }
    for (const auto& rec : r.iterations_detail) CHECK(rec.instances_after <= rec.instances_before);
    check_labeling(r.labeling, scene.points.size(), r.instances.size());

    const auto again = multix_fit(scene.points, classes, cfg);
    CHECK(again.instances == r.instances);
    CHECK(again.labeling == r.labeling);
    CHECK(again.final_energy.total == r.final_energy.total);
  }
}

TEST_CASE("the first mode move can be guarded too") {
  SceneSpec spec;
  spec.components = {{ClassId::Line, 60}, {ClassId::Circle, 60}};
  spec.noise_sigma = 0.5;
  spec.outliers = 20;
  const auto scene = generate_scene(spec, 9);
  const auto classes = scene_classes(spec);
  auto cfg = config_for(scene.points, classes, 9);
  cfg.strict_guard = true;
  const auto graph = build_neighborhood(scene.points, cfg.neighborhood_k);
  GuardRecorder guard;
  guard.points = &scene.points;
  guard.graph = &graph;
  guard.config = &cfg;
  const auto r = multix_fit(scene.points, classes, cfg, &guard);
  CHECK(guard.calls >= 1);
  CHECK(guard.violations == 0);
  CHECK(r.mode_moves_accepted == guard.accepted);
}

TEST_CASE("fit preconditions") {
  PointSet two(2);
  two.push_back(std::vector<double>{0.0, 0.0});
  two.push_back(std::vector<double>{1.0, 1.0});
  const std::vector<ClassId> circle{ClassId::Circle};
  CHECK_THROWS_AS(multix_fit(two, circle, FitConfig{}), InsufficientPoints);
  const std::vector<ClassId> plane{ClassId::Plane};
  CHECK_THROWS_AS(multix_fit(two, plane, FitConfig{}), std::invalid_argument);
}
