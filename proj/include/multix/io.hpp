#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "multix/models.hpp"
#include "multix/pipeline.hpp"

namespace multix {

/// Malformed point data; `line()` is 1-based, 0 when no line applies.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Reads `x,y[,z...][,gt]` rows. A `# dims=<d> gt=<0|1>` header fixes the
/// layout; without one every column is a coordinate. Other `#` lines and
/// blank lines are ignored.
PointSet read_points_csv(std::istream& in);
PointSet read_points_csv(const std::filesystem::path& path);

/// Header plus one row per point, 17 significant digits.
void write_points_csv(std::ostream& out, const PointSet& points);

/// Header block, one instance per line, then one label per point.
void write_result(std::ostream& out, const FitResult& result);

/// Writes to a sibling temporary file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);

/// %.17g formatting.
std::string format_real(double v);

nlohmann::ordered_json config_to_json(const FitConfig& config);

/// Inverse of config_to_json; missing keys keep their defaults.
FitConfig config_from_json(const nlohmann::json& j);

}  // namespace multix
