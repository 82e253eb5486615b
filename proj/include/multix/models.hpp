#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace multix {

enum class ClassId : std::uint8_t { Line = 0, Circle, Plane, Cylinder, Homography };

inline constexpr std::size_t kNumClasses = 5;

/// Fixed-size table indexed by model class.
template <typename T>
using ClassTable = std::array<T, kNumClasses>;

constexpr std::size_t index_of(ClassId id) { return static_cast<std::size_t>(id); }

std::string_view class_name(ClassId id);
std::optional<ClassId> parse_class_name(std::string_view name);

class NonCanonicalizable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major point storage. Every point shares the same ambient dimension.
/// Homography correspondences are stored as (x1, y1, x2, y2).
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t dim) : dim_(dim) {}
  PointSet(std::size_t dim, std::vector<double> coords, std::vector<int> gt = {});

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const { return size() == 0; }

  std::span<const double> operator[](std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }

  void push_back(std::span<const double> p, std::optional<int> gt = std::nullopt);

  const std::vector<double>& coords() const { return coords_; }
  bool has_gt() const { return !gt_.empty(); }
  const std::vector<int>& gt() const { return gt_; }

  /// Half of the axis-aligned bounding-box diagonal; 1.0 for an empty or
  /// single-point set.
  double half_bbox_diagonal() const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
  std::vector<int> gt_;
};

struct ModelClassDescriptor {
  ClassId id = ClassId::Line;
  std::size_t param_dim = 0;
  std::size_t minimal_sample_size = 0;
  std::size_t rep_size = 0;       // number of canonical representation points
  std::size_t rep_point_dim = 0;  // dimension of each representation point
  std::size_t ambient_dim = 0;
  double class_weight = 1.0;      // psi
  double rep_scale = 1.0;         // offset of the secondary representation points
};

/// Descriptor with the standard constants of `id`. The class weight defaults to
/// the minimal sample size, which makes the label-cost term reproduce the
/// m * ln|P| / h_max per-instance penalty.
ModelClassDescriptor describe(ClassId id, double rep_scale = 1.0);

struct OutlierClassConfig {
  double constant_cost = 0.39346934028736658;  // 1 - exp(-1/2)
};

/// One model hypothesis. `rep` holds rep_size points of rep_point_dim
/// coordinates each, flattened.
struct Instance {
  ClassId class_id = ClassId::Line;
  std::vector<double> params;
  std::vector<double> rep;

  friend bool operator==(const Instance&, const Instance&) = default;
};

// Parameter layouts:
//   line:       (alpha, c)                      cos(alpha) x + sin(alpha) y + c = 0
//   circle:     (cx, cy, r)
//   plane:      (azimuth, elevation, offset)    n . x + offset = 0
//   cylinder:   (px, py, pz, dx, dy, dz, r)     axis point, unit axis direction, radius
//   homography: row-major 3x3 H, x2 ~ H x1

/// Minimal or weighted least-squares fit of `desc` to the points selected by
/// `sample`. Returns nullopt when the sample does not determine a unique
/// instance. `weights`, if non-empty, must match `sample`. `init` seeds the
/// iterative fits (circle refinement, cylinder Gauss-Newton).
std::optional<Instance> estimate(const ModelClassDescriptor& desc, const PointSet& points,
                                 std::span<const std::size_t> sample,
                                 std::span<const double> weights = {},
                                 const Instance* init = nullptr);

/// Geometric point-to-model distance.
double distance(const ModelClassDescriptor& desc, const Instance& inst, std::span<const double> p);

std::vector<double> canonicalize(const ModelClassDescriptor& desc, std::span<const double> params);

/// Builds an instance from parameters, filling in the canonical representation.
Instance make_instance(const ModelClassDescriptor& desc, std::vector<double> params);

// Geometry helpers shared with scene generation and tests.
std::vector<double> line_params_from_normal(double nx, double ny, double c);
std::vector<double> plane_params_from_normal(double nx, double ny, double nz, double offset);

}  // namespace multix
