#include "multix/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <system_error>

namespace multix {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                        : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

struct Header {
  std::size_t dims = 0;
  bool gt = false;
};

/// Parses `# dims=<d> gt=<0|1>`; nullopt for ordinary comments.
std::optional<Header> parse_header(std::string_view line, std::size_t line_no) {
  line = trim(line.substr(1));
  if (line.rfind("dims=", 0) != 0) return std::nullopt;
  Header h;
  std::istringstream words{std::string(line)};
  std::string word;
  while (words >> word) {
    const auto eq = word.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "bad header token '" + word + "'");
    const std::string key = word.substr(0, eq);
    const auto value = parse_number<std::size_t>(std::string_view(word).substr(eq + 1));
    if (!value) throw ParseError(line_no, "bad header value in '" + word + "'");
    if (key == "dims") {
      h.dims = *value;
    } else if (key == "gt") {
      if (*value > 1) throw ParseError(line_no, "gt must be 0 or 1");
      h.gt = *value == 1;
    } else {
      throw ParseError(line_no, "unknown header key '" + key + "'");
    }
  }
  if (h.dims == 0) throw ParseError(line_no, "dims must be positive");
  return h;
}

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

PointSet read_points_csv(std::istream& in) {
  std::optional<Header> header;
  PointSet points;
  std::string raw;
  std::size_t line_no = 0;
  std::vector<double> coords;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (auto h = parse_header(line, line_no)) {
        if (header || !points.empty()) throw ParseError(line_no, "header must precede the data");
        header = h;
        points = PointSet(h->dims);
      }
      continue;
    }
    const auto fields = split_commas(line);
    if (!header) {
      header = Header{fields.size(), false};
      points = PointSet(fields.size());
    }
    const std::size_t expected = header->dims + (header->gt ? 1 : 0);
    if (fields.size() != expected) {
      throw ParseError(line_no, "expected " + std::to_string(expected) + " columns, got " +
                                    std::to_string(fields.size()));
    }
    coords.assign(header->dims, 0.0);
    for (std::size_t c = 0; c < header->dims; ++c) {
      const auto v = parse_number<double>(fields[c]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(line_no, "column " + std::to_string(c + 1) + " is not a finite number");
      }
      coords[c] = *v;
    }
    std::optional<int> gt;
    if (header->gt) {
      gt = parse_number<int>(fields.back());
      if (!gt || *gt < -1) throw ParseError(line_no, "gt label must be an integer >= -1");
    }
    points.push_back(coords, gt);
  }
  if (points.empty()) throw ParseError(0, "no points in input");
  return points;
}

PointSet read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(0, "cannot open " + path.string());
  return read_points_csv(in);
}

std::string format_real(double v) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return buf.data();
}

void write_points_csv(std::ostream& out, const PointSet& points) {
  out << "# dims=" << points.dim() << " gt=" << (points.has_gt() ? 1 : 0) << '\n';
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto p = points[i];
    for (std::size_t c = 0; c < p.size(); ++c) {
      if (c > 0) out << ',';
      out << format_real(p[c]);
    }
    if (points.has_gt()) out << ',' << points.gt()[i];
    out << '\n';
  }
}

nlohmann::ordered_json config_to_json(const FitConfig& c) {
  nlohmann::ordered_json gamma = nlohmann::ordered_json::object();
  nlohmann::ordered_json weight = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    const std::string name(class_name(static_cast<ClassId>(i)));
    gamma[name] = c.gamma[i];
    weight[name] = c.class_weight[i];
  }
  nlohmann::ordered_json j;
  j["gamma"] = gamma;
  j["class_weight"] = weight;
  j["w_g"] = c.w_g;
  j["w_c"] = c.w_c;
  j["h_max"] = c.h_max;
  j["bandwidth_k"] = c.bandwidth_k;
  j["trial_count"] = c.trial_count;
  j["initial_multiplier"] = c.initial_multiplier;
  j["initial_instances"] = c.initial_instances;
  j["neighborhood_k"] = c.neighborhood_k;
  j["max_iterations"] = c.max_iterations;
  j["seed"] = c.seed;
  j["outlier_cost"] = c.outlier_cost;
  j["mode_seeking"] = c.mode_seeking;
  j["validation"] = c.validation;
  j["strict_guard"] = c.strict_guard;
  j["refit"] = c.refit == RefitMethod::L2 ? "l2" : "weiszfeld";
  return j;
}

FitConfig config_from_json(const nlohmann::json& j) {
  FitConfig c;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    const std::string name(class_name(static_cast<ClassId>(i)));
    if (j.contains("gamma") && j["gamma"].contains(name)) c.gamma[i] = j["gamma"][name].get<double>();
    if (j.contains("class_weight") && j["class_weight"].contains(name)) {
      c.class_weight[i] = j["class_weight"][name].get<double>();
    }
  }
  auto take = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  take("w_g", c.w_g);
  take("w_c", c.w_c);
  take("h_max", c.h_max);
  take("bandwidth_k", c.bandwidth_k);
  take("trial_count", c.trial_count);
  take("initial_multiplier", c.initial_multiplier);
  take("initial_instances", c.initial_instances);
  take("neighborhood_k", c.neighborhood_k);
  take("max_iterations", c.max_iterations);
  take("seed", c.seed);
  take("outlier_cost", c.outlier_cost);
  take("mode_seeking", c.mode_seeking);
  take("validation", c.validation);
  take("strict_guard", c.strict_guard);
  if (j.contains("refit")) {
    const auto r = j["refit"].get<std::string>();
    if (r == "l2") {
      c.refit = RefitMethod::L2;
    } else if (r == "weiszfeld") {
      c.refit = RefitMethod::Weiszfeld;
    } else {
      throw std::invalid_argument("unknown refit method '" + r + "'");
    }
  }
  return c;
}

void write_result(std::ostream& out, const FitResult& r) {
  std::vector<std::size_t> support(r.instances.size(), 0);
  std::size_t outliers = 0;
  for (Label l : r.labeling) {
    if (l == kOutlier) {
      ++outliers;
    } else {
      ++support[static_cast<std::size_t>(l)];
    }
  }
  out << "# multix result\n";
  out << "instances " << r.instances.size() << '\n';
  out << "points " << r.labeling.size() << '\n';
  out << "outliers " << outliers << '\n';
  out << "energy_total " << format_real(r.final_energy.total) << '\n';
  out << "energy_data " << format_real(r.final_energy.data) << '\n';
  out << "energy_smoothness " << format_real(r.final_energy.smoothness) << '\n';
  out << "energy_label_cost " << format_real(r.final_energy.label_cost) << '\n';
  out << "iterations " << r.iterations << '\n';
  out << "mode_moves_accepted " << r.mode_moves_accepted << '\n';
  out << "mode_moves_rejected " << r.mode_moves_rejected << '\n';
  out << "validation_removed " << r.validation_removed << '\n';
  out << "config " << config_to_json(r.config).dump() << '\n';
  out << "# class_id,params...,support_count\n";
  for (std::size_t i = 0; i < r.instances.size(); ++i) {
    out << class_name(r.instances[i].class_id);
    for (double v : r.instances[i].params) out << ',' << format_real(v);
    out << ',' << support[i] << '\n';
  }
  out << "# labels\n";
  for (Label l : r.labeling) out << l << '\n';
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

}  // namespace multix
