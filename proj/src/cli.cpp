#include "multix/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "multix/eval.hpp"
#include "multix/io.hpp"
#include "multix/pipeline.hpp"

namespace multix {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

/// Flags shared by fit and bench.
struct ConfigFlags {
  std::optional<double> gamma;
  std::optional<double> w_g;
  std::optional<std::size_t> h_max;
  std::optional<std::size_t> bandwidth_k;
  std::optional<std::size_t> trials;
  std::optional<double> init_mult;
  std::optional<std::size_t> neighbors;
  std::optional<std::size_t> max_iter;
  std::optional<double> outlier_cost;
  std::optional<std::string> refit;
  bool no_modeseek = false;
  bool no_validation = false;
  bool strict_guard = false;
  std::uint64_t seed = 0;

  void attach(CLI::App& app) {
    app.add_option("--gamma", gamma, "Outlier threshold for every class");
    app.add_option("--wg", w_g, "Spatial coherence weight");
    app.add_option("--hmax", h_max, "Label-cost normalizer h_max");
    app.add_option("--bandwidth-k", bandwidth_k, "Neighbor rank for mode-seeking bandwidths");
    app.add_option("--trials", trials, "Validation trials per instance");
    app.add_option("--init-mult", init_mult, "Initial instances per input point");
    app.add_option("--neighbors", neighbors, "Neighborhood graph k");
    app.add_option("--max-iter", max_iter, "Maximum outer iterations");
    app.add_option("--outlier-cost", outlier_cost, "Constant outlier cost in (0,1]");
    app.add_option("--refit", refit, "Refit method")->check(CLI::IsMember({"l2", "weiszfeld"}));
    app.add_flag("--no-modeseek", no_modeseek, "Disable mode-seeking (PEARL alternation)");
    app.add_flag("--no-validation", no_validation, "Skip the final validation");
    app.add_flag("--strict-guard", strict_guard, "Guard the first mode-seeking move too");
    app.add_option("--seed", seed, "Random seed");
  }

  ConfigOverrides overrides() const {
    ConfigOverrides o;
    o.gamma = gamma;
    o.w_g = w_g;
    o.h_max = h_max;
    o.bandwidth_k = bandwidth_k;
    o.trial_count = trials;
    o.initial_multiplier = init_mult;
    o.neighborhood_k = neighbors;
    o.max_iterations = max_iter;
    o.outlier_cost = outlier_cost;
    o.seed = seed;
    if (no_modeseek) o.mode_seeking = false;
    if (no_validation) o.validation = false;
    if (strict_guard) o.strict_guard = true;
    if (refit) o.refit = *refit == "weiszfeld" ? RefitMethod::Weiszfeld : RefitMethod::L2;
    return o;
  }
};

/// Scene flags shared by synth and bench.
struct SceneFlags {
  std::size_t lines = 0;
  std::size_t circles = 0;
  std::size_t planes = 0;
  std::size_t cylinders = 0;
  std::size_t homographies = 0;
  std::size_t per = 100;
  std::size_t outliers = 0;
  double sigma = 0.0;
  double box = 100.0;

  void attach(CLI::App& app) {
    app.add_option("--lines", lines, "Number of 2D lines");
    app.add_option("--circles", circles, "Number of 2D circles");
    app.add_option("--planes", planes, "Number of 3D planes");
    app.add_option("--cylinders", cylinders, "Number of 3D cylinders");
    app.add_option("--homographies", homographies, "Number of planar homographies");
    app.add_option("--per", per, "Points per instance");
    app.add_option("--outliers", outliers, "Uniform outlier count");
    app.add_option("--sigma", sigma, "Gaussian noise sigma");
    app.add_option("--box", box, "Side of the box [0, box]^d");
  }

  SceneSpec spec() const {
    if (!(box > 0.0)) throw InvalidOverride("--box must be positive");
    if (!(sigma >= 0.0)) throw InvalidOverride("--sigma must be non-negative");
    SceneSpec s;
    const std::pair<ClassId, std::size_t> counts[] = {{ClassId::Line, lines},
                                                      {ClassId::Circle, circles},
                                                      {ClassId::Plane, planes},
                                                      {ClassId::Cylinder, cylinders},
                                                      {ClassId::Homography, homographies}};
    std::optional<std::size_t> dim;
    for (const auto& [id, count] : counts) {
      if (count == 0) continue;
      const std::size_t d = describe(id).ambient_dim;
      if (dim && *dim != d) throw InvalidOverride("requested classes have different dimensions");
      dim = d;
      for (std::size_t i = 0; i < count; ++i) s.components.push_back({id, per});
    }
    if (s.components.empty() && outliers == 0) throw InvalidOverride("empty scene requested");
    s.noise_sigma = sigma;
    s.outliers = outliers;
    s.box_min = 0.0;
    s.box_max = box;
    return s;
  }
};

std::vector<ClassId> parse_classes(const std::vector<std::string>& names) {
  std::vector<ClassId> out;
  for (const auto& n : names) {
    const auto id = parse_class_name(n);
    if (!id) throw InvalidOverride("unknown class '" + n + "'");
    if (std::find(out.begin(), out.end(), *id) == out.end()) out.push_back(*id);
  }
  if (out.empty()) throw InvalidOverride("at least one class is required");
  return out;
}

/// Flags the user actually passed, as typed.
ordered_json echo_flags(const CLI::App& app) {
  ordered_json j = ordered_json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->count() == 0 || opt->get_lnames().empty()) continue;
    const auto& results = opt->results();
    const std::string key = "--" + opt->get_lnames().front();
    if (results.empty() || opt->get_type_size() == 0) {
      j[key] = true;
    } else if (results.size() == 1) {
      j[key] = results.front();
    } else {
      j[key] = results;
    }
  }
  return j;
}

void emit(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
  } else {
    atomic_write(path, content);
  }
}

ordered_json timings_json(const StageTimings& t) {
  ordered_json j;
  j["generation_ms"] = t.generation_ms;
  j["mode_seeking_ms"] = t.mode_seeking_ms;
  j["labeling_ms"] = t.labeling_ms;
  j["refit_ms"] = t.refit_ms;
  j["validation_ms"] = t.validation_ms;
  return j;
}

struct FitCommand {
  std::string input;
  std::vector<std::string> classes;
  std::string output;
  std::string manifest;
  std::string replay;
  ConfigFlags flags;
};

int cmd_fit(const FitCommand& c, const CLI::App& sub, std::ostream& out, std::ostream& err) {
  std::string raw;
  PointSet points;
  try {
    raw = read_file(c.input);
    std::istringstream in(raw);
    points = read_points_csv(in);
  } catch (const ParseError& e) {
    err << "error: " << c.input << ": " << e.what() << '\n';
    return kExitMalformedInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitMalformedInput;
  }
  const std::string digest = sha256_hex(raw);

  std::vector<ClassId> classes;
  FitConfig config;
  try {
    if (!c.replay.empty()) {
      const auto m = nlohmann::json::parse(read_file(c.replay));
      std::vector<std::string> names = m.at("classes").get<std::vector<std::string>>();
      classes = parse_classes(names);
      config = config_from_json(m.at("config"));
      if (m.value("input_sha256", "") != digest) {
        err << "warning: input digest differs from the replayed manifest\n";
      }
    } else {
      classes = parse_classes(c.classes);
      config = resolve_auto_params(points, classes, c.flags.overrides());
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalidFlags;
  }
  for (ClassId id : classes) {
    if (describe(id).ambient_dim != points.dim()) {
      err << "error: " << c.input << ": class " << class_name(id) << " needs "
          << describe(id).ambient_dim << "-dimensional points, input has " << points.dim() << '\n';
      return kExitMalformedInput;
    }
  }
  for (const auto& n : config.notices) err << "notice: " << n << '\n';

  FitResult result;
  const auto start = std::chrono::steady_clock::now();
  try {
    result = multix_fit(points, classes, config);
  } catch (const std::exception& e) {
    err << "error: fit failed: " << e.what() << '\n';
    return kExitFitFailure;
  }
  const double wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  std::ostringstream body;
  write_result(body, result);

  ordered_json manifest;
  manifest["version"] = std::string(kVersion);
  manifest["command"] = "fit";
  manifest["input"] = c.input;
  manifest["input_sha256"] = digest;
  std::vector<std::string> names;
  for (ClassId id : classes) names.emplace_back(class_name(id));
  manifest["classes"] = names;
  manifest["seed"] = config.seed;
  manifest["overrides"] = echo_flags(sub);
  manifest["config"] = config_to_json(config);
  manifest["wall_ms"] = wall_ms;
  manifest["timings"] = timings_json(result.timings);
  manifest["result_sha256"] = sha256_hex(body.str());

  try {
    emit(c.output, body.str(), out);
    std::string manifest_path = c.manifest;
    if (manifest_path.empty() && !c.output.empty() && c.output != "-") {
      manifest_path = c.output + ".manifest.json";
    }
    if (!manifest_path.empty()) atomic_write(manifest_path, manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFitFailure;
  }
  return kExitOk;
}

struct SynthCommand {
  SceneFlags scene;
  std::uint64_t seed = 0;
  std::string output;
};

int cmd_synth(const SynthCommand& c, std::ostream& out, std::ostream& err) {
  SceneSpec spec;
  try {
    spec = c.scene.spec();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalidFlags;
  }
  const SyntheticScene scene = generate_scene(spec, c.seed);
  std::ostringstream body;
  write_points_csv(body, scene.points);
  try {
    emit(c.output, body.str(), out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFitFailure;
  }
  return kExitOk;
}

struct BenchCommand {
  SceneFlags scene;
  ConfigFlags flags;
  std::size_t seeds = 10;
  bool ablate = false;
  std::string output;
};

void write_bench_block(std::ostream& out, std::string_view method, const TrialStats& stats) {
  out << "# method=" << method << '\n';
  out << "seed,instance_count,misclassification,energy,wall_ms\n";
  for (const TrialRow& r : stats.rows) {
    out << r.seed << ',' << r.instance_count << ',' << format_real(r.misclassification) << ','
        << format_real(r.energy) << ',' << format_real(r.wall_ms) << '\n';
  }
  out << "# histogram";
  for (const auto& [count, p] : stats.count_probability) out << ' ' << count << ':' << format_real(p);
  out << '\n';
  out << "# mean_misclassification=" << format_real(stats.mean_misclassification) << '\n';
  out << "# median_misclassification=" << format_real(stats.median_misclassification) << '\n';
  out << "# mean_energy=" << format_real(stats.mean_energy) << '\n';
  out << "# mean_wall_ms=" << format_real(stats.mean_wall_ms) << '\n';
}

int cmd_bench(const BenchCommand& c, std::ostream& out, std::ostream& err) {
  SceneSpec spec;
  FitConfig config;
  try {
    if (c.seeds == 0) throw InvalidOverride("--seeds must be positive");
    spec = c.scene.spec();
    const auto classes = scene_classes(spec);
    if (classes.empty()) throw InvalidOverride("bench needs at least one model instance");
    const SyntheticScene probe = generate_scene(spec, c.flags.seed);
    config = resolve_auto_params(probe.points, classes, c.flags.overrides());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalidFlags;
  }
  std::vector<std::uint64_t> seeds(c.seeds);
  for (std::size_t i = 0; i < c.seeds; ++i) seeds[i] = c.flags.seed + i;

  std::ostringstream body;
  try {
    write_bench_block(body, config.mode_seeking ? "multix" : "pearl", run_trials(spec, config, seeds));
    if (c.ablate && config.mode_seeking) {
      FitConfig pearl = config;
      pearl.mode_seeking = false;
      write_bench_block(body, "pearl", run_trials(spec, pearl, seeds));
    }
  } catch (const std::exception& e) {
    err << "error: fit failed: " << e.what() << '\n';
    return kExitFitFailure;
  }
  try {
    emit(c.output, body.str(), out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFitFailure;
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-class multi-instance geometric model fitting", "multix"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  FitCommand fit;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit models to a point CSV");
  fit_cmd->add_option("input", fit.input, "Point CSV")->required();
  fit_cmd->add_option("--classes", fit.classes, "Model classes, e.g. line,circle")->delimiter(',');
  fit_cmd->add_option("-o,--output", fit.output, "Result file (stdout if omitted)");
  fit_cmd->add_option("--manifest", fit.manifest, "Manifest path (default <output>.manifest.json)");
  fit_cmd->add_option("--replay", fit.replay, "Reuse classes and config of a manifest");
  fit.flags.attach(*fit_cmd);

  SynthCommand synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene CSV");
  synth.scene.attach(*synth_cmd);
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_option("-o,--output", synth.output, "Output CSV (stdout if omitted)");

  BenchCommand bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "Repeated fits on seeded synthetic scenes");
  bench.scene.attach(*bench_cmd);
  bench.flags.attach(*bench_cmd);
  bench_cmd->add_option("--seeds", bench.seeds, "Number of seeds (seed, seed+1, ...)");
  bench_cmd->add_flag("--ablate-modeseek", bench.ablate, "Also run without mode-seeking");
  bench_cmd->add_option("-o,--output", bench.output, "Output file (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalidFlags;
  }

  if (fit_cmd->parsed()) {
    if (fit.replay.empty() && fit.classes.empty()) {
      err << "error: --classes is required\n";
      return kExitInvalidFlags;
    }
    return cmd_fit(fit, *fit_cmd, out, err);
  }
  if (synth_cmd->parsed()) return cmd_synth(synth, out, err);
  return cmd_bench(bench, out, err);
}

}  // namespace multix
