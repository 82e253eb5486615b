#include "multix/models.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace multix {

namespace {

constexpr double kSignTolerance = 1e-12;

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

Vec2 vec2(std::span<const double> p, std::size_t offset = 0) { return {p[offset], p[offset + 1]}; }
Vec3 vec3(std::span<const double> p) { return {p[0], p[1], p[2]}; }

/// Flips `v` so that its first component of non-negligible magnitude is positive.
/// Returns the applied sign.
template <typename V>
double canonical_sign(const V& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > kSignTolerance) return v[i] > 0.0 ? 1.0 : -1.0;
  }
  return 1.0;
}

/// Orthonormal (u, v) spanning the plane orthogonal to the unit vector n.
std::pair<Vec3, Vec3> orthonormal_basis(const Vec3& n) {
  Eigen::Index k = 0;
  for (Eigen::Index i = 1; i < 3; ++i) {
    if (std::abs(n[i]) < std::abs(n[k])) k = i;
  }
  Vec3 axis = Vec3::Zero();
  axis[k] = 1.0;
  Vec3 u = n.cross(axis).normalized();
  Vec3 v = n.cross(u);
  return {u, v};
}

double coord_scale(const PointSet& points, std::span<const std::size_t> sample) {
  double s = 1.0;
  for (std::size_t idx : sample) {
    for (double x : points[idx]) s = std::max(s, std::abs(x));
  }
  return s;
}

double weight_at(std::span<const double> weights, std::size_t i) {
  return weights.empty() ? 1.0 : weights[i];
}

// ---------------------------------------------------------------------------
// Line

Vec2 line_normal(double alpha) { return {std::cos(alpha), std::sin(alpha)}; }

std::optional<Instance> estimate_line(const ModelClassDescriptor& desc, const PointSet& points,
                                      std::span<const std::size_t> sample,
                                      std::span<const double> weights) {
  if (sample.size() < 2) return std::nullopt;
  const double scale = coord_scale(points, sample);
  if (sample.size() == 2 && weights.empty()) {
    const Vec2 a = vec2(points[sample[0]]);
    const Vec2 b = vec2(points[sample[1]]);
    const Vec2 d = b - a;
    const double len = d.norm();
    if (len <= 1e-12 * scale) return std::nullopt;
    const Vec2 n(-d.y() / len, d.x() / len);
    return make_instance(desc, line_params_from_normal(n.x(), n.y(), -n.dot(a)));
  }

  double wsum = 0.0;
  Vec2 centroid = Vec2::Zero();
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double w = weight_at(weights, i);
    centroid += w * vec2(points[sample[i]]);
    wsum += w;
  }
  if (wsum <= 0.0) return std::nullopt;
  centroid /= wsum;
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const Vec2 d = vec2(points[sample[i]]) - centroid;
    cov += weight_at(weights, i) * d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  if (eig.eigenvalues()[1] <= 1e-24 * scale * scale * wsum) return std::nullopt;
  const Vec2 n = eig.eigenvectors().col(0);
  return make_instance(desc, line_params_from_normal(n.x(), n.y(), -n.dot(centroid)));
}

double line_distance(const Instance& inst, std::span<const double> p) {
  const double a = inst.params[0];
  return std::abs(std::cos(a) * p[0] + std::sin(a) * p[1] + inst.params[1]);
}

std::vector<double> line_rep(const ModelClassDescriptor& desc, std::span<const double> params) {
  Vec2 n = line_normal(params[0]);
  double c = params[1];
  const double s = canonical_sign(n);
  n *= s;
  c *= s;
  const Vec2 foot = -c * n;
  const Vec2 dir(-n.y(), n.x());
  const Vec2 second = foot + desc.rep_scale * dir;
  return {foot.x(), foot.y(), second.x(), second.y()};
}

// ---------------------------------------------------------------------------
// Circle

std::optional<Instance> circle_from_three(const ModelClassDescriptor& desc, const Vec2& a,
                                          const Vec2& b, const Vec2& c) {
  const Vec2 bp = b - a;
  const Vec2 cp = c - a;
  const double det = 2.0 * (bp.x() * cp.y() - bp.y() * cp.x());
  if (std::abs(det) <= 1e-12 * bp.norm() * cp.norm() || bp.norm() == 0.0 || cp.norm() == 0.0) {
    return std::nullopt;
  }
  const double b2 = bp.squaredNorm();
  const double c2 = cp.squaredNorm();
  const Vec2 u((cp.y() * b2 - bp.y() * c2) / det, (bp.x() * c2 - cp.x() * b2) / det);
  const Vec2 center = a + u;
  const double r = u.norm();
  if (!std::isfinite(r) || r <= 0.0) return std::nullopt;
  return make_instance(desc, {center.x(), center.y(), r});
}

double circle_sse(const PointSet& points, std::span<const std::size_t> sample,
                  std::span<const double> weights, const Vec2& center, double r) {
  double sse = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double e = (vec2(points[sample[i]]) - center).norm() - r;
    sse += weight_at(weights, i) * e * e;
  }
  return sse;
}

std::optional<Instance> estimate_circle(const ModelClassDescriptor& desc, const PointSet& points,
                                        std::span<const std::size_t> sample,
                                        std::span<const double> weights) {
  if (sample.size() < 3) return std::nullopt;
  if (sample.size() == 3 && weights.empty()) {
    return circle_from_three(desc, vec2(points[sample[0]]), vec2(points[sample[1]]),
                             vec2(points[sample[2]]));
  }

  // Algebraic (Kasa) fit on centered coordinates: x^2 + y^2 + D x + E y + F = 0.
  Vec2 mean = Vec2::Zero();
  double wsum = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    mean += weight_at(weights, i) * vec2(points[sample[i]]);
    wsum += weight_at(weights, i);
  }
  if (wsum <= 0.0) return std::nullopt;
  mean /= wsum;
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const Vec2 q = vec2(points[sample[i]]) - mean;
    const Eigen::Vector3d row(q.x(), q.y(), 1.0);
    const double w = weight_at(weights, i);
    ata += w * row * row.transpose();
    atb += w * row * (-q.squaredNorm());
  }
  Eigen::FullPivLU<Eigen::Matrix3d> lu(ata);
  lu.setThreshold(1e-12);
  if (lu.rank() < 3) return std::nullopt;
  const Eigen::Vector3d sol = lu.solve(atb);
  Vec2 center = mean + Vec2(-sol[0] / 2.0, -sol[1] / 2.0);
  const double r2 = sol[0] * sol[0] / 4.0 + sol[1] * sol[1] / 4.0 - sol[2];
  if (!(r2 > 0.0) || !std::isfinite(r2)) return std::nullopt;
  double r = std::sqrt(r2);

  // One Gauss-Newton pass on the geometric residual.
  Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
  Eigen::Vector3d jte = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const Vec2 d = vec2(points[sample[i]]) - center;
    const double rho = d.norm();
    if (rho == 0.0) continue;
    const Eigen::Vector3d j(-d.x() / rho, -d.y() / rho, -1.0);
    const double w = weight_at(weights, i);
    jtj += w * j * j.transpose();
    jte += w * j * (rho - r);
  }
  const Eigen::Vector3d step = jtj.ldlt().solve(-jte);
  if (step.allFinite()) {
    const Vec2 c2 = center + step.head<2>();
    const double rr = r + step[2];
    if (rr > 0.0 &&
        circle_sse(points, sample, weights, c2, rr) <= circle_sse(points, sample, weights, center, r)) {
      center = c2;
      r = rr;
    }
  }
  return make_instance(desc, {center.x(), center.y(), r});
}

double circle_distance(const Instance& inst, std::span<const double> p) {
  return std::abs(inst.params[2] - std::hypot(inst.params[0] - p[0], inst.params[1] - p[1]));
}

// ---------------------------------------------------------------------------
// Plane

Vec3 plane_normal(double azimuth, double elevation) {
  return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth),
          std::sin(elevation)};
}

std::optional<Instance> estimate_plane(const ModelClassDescriptor& desc, const PointSet& points,
                                       std::span<const std::size_t> sample,
                                       std::span<const double> weights) {
  if (sample.size() < 3) return std::nullopt;
  const double scale = coord_scale(points, sample);
  if (sample.size() == 3 && weights.empty()) {
    const Vec3 a = vec3(points[sample[0]]);
    const Vec3 ab = vec3(points[sample[1]]) - a;
    const Vec3 ac = vec3(points[sample[2]]) - a;
    const Vec3 n = ab.cross(ac);
    const double len = n.norm();
    if (len <= 1e-12 * ab.norm() * ac.norm() || len <= 1e-24 * scale * scale) return std::nullopt;
    const Vec3 nn = n / len;
    return make_instance(desc, plane_params_from_normal(nn.x(), nn.y(), nn.z(), -nn.dot(a)));
  }
  double wsum = 0.0;
  Vec3 centroid = Vec3::Zero();
  for (std::size_t i = 0; i < sample.size(); ++i) {
    centroid += weight_at(weights, i) * vec3(points[sample[i]]);
    wsum += weight_at(weights, i);
  }
  if (wsum <= 0.0) return std::nullopt;
  centroid /= wsum;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const Vec3 d = vec3(points[sample[i]]) - centroid;
    cov += weight_at(weights, i) * d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  // A unique plane needs the points to span two directions.
  if (eig.eigenvalues()[1] <= 1e-24 * scale * scale * wsum) return std::nullopt;
  const Vec3 n = eig.eigenvectors().col(0);
  return make_instance(desc, plane_params_from_normal(n.x(), n.y(), n.z(), -n.dot(centroid)));
}

double plane_distance(const Instance& inst, std::span<const double> p) {
  const Vec3 n = plane_normal(inst.params[0], inst.params[1]);
  return std::abs(n.dot(vec3(p)) + inst.params[2]);
}

std::vector<double> plane_rep(const ModelClassDescriptor& desc, std::span<const double> params) {
  Vec3 n = plane_normal(params[0], params[1]);
  double offset = params[2];
  const double s = canonical_sign(n);
  n *= s;
  offset *= s;
  const Vec3 foot = -offset * n;
  const auto [u, v] = orthonormal_basis(n);
  const Vec3 a = foot + desc.rep_scale * u;
  const Vec3 b = foot + desc.rep_scale * v;
  return {foot.x(), foot.y(), foot.z(), a.x(), a.y(), a.z(), b.x(), b.y(), b.z()};
}

// ---------------------------------------------------------------------------
// Cylinder

struct CylinderModel {
  Vec3 point;
  Vec3 dir;
  double radius;
};

double cylinder_residual(const CylinderModel& m, const Vec3& x) {
  const Vec3 v = x - m.point;
  return (v - v.dot(m.dir) * m.dir).norm() - m.radius;
}

double cylinder_sse(const CylinderModel& m, const std::vector<Vec3>& pts,
                    std::span<const double> weights) {
  double sse = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double e = cylinder_residual(m, pts[i]);
    sse += weight_at(weights, i) * e * e;
  }
  return sse;
}

double cylinder_max_residual(const CylinderModel& m, const std::vector<Vec3>& pts) {
  double worst = 0.0;
  for (const Vec3& x : pts) worst = std::max(worst, std::abs(cylinder_residual(m, x)));
  return worst;
}

/// Levenberg-Marquardt on the point-to-surface residual, over a 5-dof local
/// parameterization (2 for the direction, 2 for the axis point, 1 for the radius).
CylinderModel refine_cylinder(CylinderModel m, const std::vector<Vec3>& pts,
                              std::span<const double> weights, int max_iterations) {
  double lambda = 1e-6;
  double sse = cylinder_sse(m, pts, weights);
  for (int it = 0; it < max_iterations; ++it) {
    const auto [u, v] = orthonormal_basis(m.dir);
    Eigen::Matrix<double, 5, 5> jtj = Eigen::Matrix<double, 5, 5>::Zero();
    Eigen::Matrix<double, 5, 1> jte = Eigen::Matrix<double, 5, 1>::Zero();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Vec3 d = pts[i] - m.point;
      const double along = d.dot(m.dir);
      const Vec3 perp = d - along * m.dir;
      const double rho = perp.norm();
      if (rho < 1e-300) continue;
      Eigen::Matrix<double, 5, 1> j;
      j << -along * perp.dot(u) / rho, -along * perp.dot(v) / rho, -perp.dot(u) / rho,
          -perp.dot(v) / rho, -1.0;
      const double w = weight_at(weights, i);
      jtj += w * j * j.transpose();
      jte += w * j * (rho - m.radius);
    }
    bool improved = false;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::Matrix<double, 5, 5> a = jtj;
      a.diagonal() += lambda * (jtj.diagonal().array() + 1e-12).matrix();
      const Eigen::Matrix<double, 5, 1> step = a.ldlt().solve(-jte);
      if (!step.allFinite()) break;
      CylinderModel trial = m;
      trial.dir = (m.dir + step[0] * u + step[1] * v).normalized();
      trial.point = m.point + step[2] * u + step[3] * v;
      trial.radius = m.radius + step[4];
      const double trial_sse = cylinder_sse(trial, pts, weights);
      if (trial.radius > 0.0 && trial_sse <= sse) {
        const bool negligible = sse - trial_sse <= 1e-30 + 1e-15 * sse;
        m = trial;
        sse = trial_sse;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = !negligible;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }
  return m;
}

/// Radius and axis point from a direction guess: algebraic circle fit in the
/// plane orthogonal to `dir`.
std::optional<CylinderModel> cylinder_from_direction(const Vec3& dir, const std::vector<Vec3>& pts,
                                                     std::span<const double> weights) {
  const auto [u, v] = orthonormal_basis(dir);
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  Vec3 mean = Vec3::Zero();
  double wsum = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    mean += weight_at(weights, i) * pts[i];
    wsum += weight_at(weights, i);
  }
  mean /= wsum;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 d = pts[i] - mean;
    const double x = d.dot(u);
    const double y = d.dot(v);
    const Eigen::Vector3d row(x, y, 1.0);
    const double w = weight_at(weights, i);
    ata += w * row * row.transpose();
    atb += w * row * (-(x * x + y * y));
  }
  Eigen::FullPivLU<Eigen::Matrix3d> lu(ata);
  lu.setThreshold(1e-12);
  if (lu.rank() < 3) return std::nullopt;
  const Eigen::Vector3d sol = lu.solve(atb);
  const double r2 = sol[0] * sol[0] / 4.0 + sol[1] * sol[1] / 4.0 - sol[2];
  if (!(r2 > 0.0) || !std::isfinite(r2)) return std::nullopt;
  return CylinderModel{mean - sol[0] / 2.0 * u - sol[1] / 2.0 * v, dir, std::sqrt(r2)};
}

Vec3 random_hemisphere_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec3 d;
  do {
    d = Vec3(normal(rng), normal(rng), normal(rng));
  } while (d.norm() < 1e-9);
  d.normalize();
  if (d.z() < 0.0) d = -d;
  return d;
}

std::vector<double> cylinder_params(const CylinderModel& m) {
  return {m.point.x(), m.point.y(), m.point.z(), m.dir.x(), m.dir.y(), m.dir.z(), m.radius};
}

CylinderModel cylinder_model(std::span<const double> params) {
  return {Vec3(params[0], params[1], params[2]), Vec3(params[3], params[4], params[5]).normalized(),
          params[6]};
}

constexpr int kCylinderRestarts = 20;
constexpr std::uint64_t kCylinderSeed = 0x6d756c746978ULL;

std::optional<Instance> estimate_cylinder(const ModelClassDescriptor& desc, const PointSet& points,
                                          std::span<const std::size_t> sample,
                                          std::span<const double> weights, const Instance* init) {
  if (sample.size() < 5) return std::nullopt;
  std::vector<Vec3> pts;
  pts.reserve(sample.size());
  for (std::size_t idx : sample) pts.push_back(vec3(points[idx]));
  const double scale = coord_scale(points, sample);

  std::mt19937_64 rng(kCylinderSeed);
  if (sample.size() == 5 && weights.empty()) {
    for (int attempt = 0; attempt < kCylinderRestarts; ++attempt) {
      const Vec3 dir = random_hemisphere_direction(rng);
      auto start = cylinder_from_direction(dir, pts, weights);
      if (!start) continue;
      const CylinderModel m = refine_cylinder(*start, pts, weights, 100);
      if (m.radius > 0.0 && std::isfinite(m.radius) && cylinder_max_residual(m, pts) <= 1e-6) {
        return make_instance(desc, cylinder_params(m));
      }
    }
    return std::nullopt;
  }

  std::optional<CylinderModel> best;
  double best_sse = std::numeric_limits<double>::infinity();
  auto consider = [&](const CylinderModel& start, int iterations) {
    const CylinderModel m = refine_cylinder(start, pts, weights, iterations);
    if (!(m.radius > 0.0) || !std::isfinite(m.radius)) return;
    const double sse = cylinder_sse(m, pts, weights);
    if (sse < best_sse) {
      best_sse = sse;
      best = m;
    }
  };
  if (init != nullptr && init->class_id == ClassId::Cylinder) {
    consider(cylinder_model(init->params), 50);
  } else {
    for (int attempt = 0; attempt < kCylinderRestarts; ++attempt) {
      if (auto start = cylinder_from_direction(random_hemisphere_direction(rng), pts, weights)) {
        consider(*start, 30);
      }
    }
  }
  if (!best || best->radius > 1e6 * scale) return std::nullopt;
  return make_instance(desc, cylinder_params(*best));
}

double cylinder_distance(const Instance& inst, std::span<const double> p) {
  const Vec3 point(inst.params[0], inst.params[1], inst.params[2]);
  const Vec3 dir(inst.params[3], inst.params[4], inst.params[5]);
  const Vec3 d = vec3(p) - point;
  return std::abs((d - d.dot(dir) * dir).norm() - inst.params[6]);
}

std::vector<double> cylinder_rep(const ModelClassDescriptor& desc, std::span<const double> params) {
  Vec3 dir(params[3], params[4], params[5]);
  const double len = dir.norm();
  if (!(len > 0.0) || !std::isfinite(len)) throw NonCanonicalizable("cylinder with zero axis direction");
  dir /= len;
  dir *= canonical_sign(dir);
  const Vec3 point(params[0], params[1], params[2]);
  const Vec3 foot = point - point.dot(dir) * dir;
  const auto [u, v] = orthonormal_basis(dir);
  const Vec3 a = foot + desc.rep_scale * dir;
  const Vec3 b = foot + params[6] * u;
  return {foot.x(), foot.y(), foot.z(), a.x(), a.y(), a.z(), b.x(), b.y(), b.z()};
}

// ---------------------------------------------------------------------------
// Homography

using Mat3 = Eigen::Matrix3d;

Mat3 homography_matrix(std::span<const double> params) {
  Mat3 h;
  h << params[0], params[1], params[2], params[3], params[4], params[5], params[6], params[7],
      params[8];
  return h;
}

Mat3 normalizing_transform(const std::vector<Vec2>& pts) {
  Vec2 mean = Vec2::Zero();
  for (const Vec2& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double spread = 0.0;
  for (const Vec2& p : pts) spread += (p - mean).norm();
  spread /= static_cast<double>(pts.size());
  const double s = spread > 0.0 ? std::numbers::sqrt2 / spread : 1.0;
  Mat3 t;
  t << s, 0.0, -s * mean.x(), 0.0, s, -s * mean.y(), 0.0, 0.0, 1.0;
  return t;
}

std::optional<Instance> estimate_homography(const ModelClassDescriptor& desc, const PointSet& points,
                                            std::span<const std::size_t> sample,
                                            std::span<const double> weights) {
  if (sample.size() < 4) return std::nullopt;
  std::vector<Vec2> src;
  std::vector<Vec2> dst;
  for (std::size_t idx : sample) {
    src.push_back(vec2(points[idx], 0));
    dst.push_back(vec2(points[idx], 2));
  }
  const Mat3 t1 = normalizing_transform(src);
  const Mat3 t2 = normalizing_transform(dst);

  const auto n = static_cast<Eigen::Index>(sample.size());
  Eigen::MatrixXd a(std::max<Eigen::Index>(2 * n, 9), 9);
  a.setZero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d p = t1 * src[i].homogeneous();
    const Eigen::Vector3d q = t2 * dst[i].homogeneous();
    const double w = std::sqrt(weight_at(weights, static_cast<std::size_t>(i)));
    const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
    a.row(2 * i) << 0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v;
    a.row(2 * i + 1) << x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u;
    a.row(2 * i) *= w;
    a.row(2 * i + 1) *= w;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  // The solution must be the unique null direction: the second smallest of
  // the nine singular values has to be bounded away from zero.
  if (s[7] <= 1e-10 * s[0]) return std::nullopt;
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  Mat3 hm = t2.inverse() * hn * t1;
  if (std::abs(hm(2, 2)) > 1e-12 * hm.norm()) {
    hm /= hm(2, 2);
  } else {
    hm /= hm.norm();
  }
  if (!hm.allFinite() || std::abs(hm.determinant()) <= 1e-12 * std::pow(hm.norm(), 3)) {
    return std::nullopt;
  }
  return make_instance(desc, {hm(0, 0), hm(0, 1), hm(0, 2), hm(1, 0), hm(1, 1), hm(1, 2), hm(2, 0),
                              hm(2, 1), hm(2, 2)});
}

double transfer(const Mat3& h, const Vec2& from, const Vec2& to) {
  const Eigen::Vector3d m = h * from.homogeneous();
  if (std::abs(m.z()) < 1e-300) return std::numeric_limits<double>::infinity();
  return (m.hnormalized() - to).norm();
}

double homography_distance(const Instance& inst, std::span<const double> p) {
  const Mat3 h = homography_matrix(inst.params);
  Mat3 inv;
  bool invertible = false;
  double det = 0.0;
  h.computeInverseAndDetWithCheck(inv, det, invertible, 0.0);
  if (!invertible) return std::numeric_limits<double>::infinity();
  const Vec2 x1 = vec2(p, 0);
  const Vec2 x2 = vec2(p, 2);
  return 0.5 * (transfer(h, x1, x2) + transfer(inv, x2, x1));
}

std::vector<double> homography_rep(std::span<const double> params) {
  Mat3 h = homography_matrix(params);
  const double norm = h.norm();
  if (!(norm > 0.0) || std::abs(h(2, 2)) <= 1e-12 * norm) {
    throw NonCanonicalizable("homography with H[2][2] = 0");
  }
  h /= h(2, 2);
  if (std::abs(h.determinant()) <= 1e-15 * std::pow(h.norm(), 3)) {
    throw NonCanonicalizable("singular homography");
  }
  std::vector<double> rep;
  rep.reserve(8);
  for (const auto& corner : {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1), Vec2(1, 1)}) {
    const Eigen::Vector3d m = h * corner.homogeneous();
    if (m.z() == 0.0) throw NonCanonicalizable("homography maps a corner to infinity");
    rep.push_back(m.x() / m.z());
    rep.push_back(m.y() / m.z());
  }
  return rep;
}

}  // namespace

std::string_view class_name(ClassId id) {
  switch (id) {
    case ClassId::Line: return "line";
    case ClassId::Circle: return "circle";
    case ClassId::Plane: return "plane";
    case ClassId::Cylinder: return "cylinder";
    case ClassId::Homography: return "homography";
  }
  return "unknown";
}

std::optional<ClassId> parse_class_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    const auto id = static_cast<ClassId>(i);
    if (class_name(id) == name) return id;
  }
  return std::nullopt;
}

PointSet::PointSet(std::size_t dim, std::vector<double> coords, std::vector<int> gt)
    : dim_(dim), coords_(std::move(coords)), gt_(std::move(gt)) {
  if (dim_ == 0 || coords_.size() % dim_ != 0) {
    throw std::invalid_argument("coordinate count is not a multiple of the dimension");
  }
  if (!gt_.empty() && gt_.size() != size()) {
    throw std::invalid_argument("ground-truth label count does not match point count");
  }
}

void PointSet::push_back(std::span<const double> p, std::optional<int> gt) {
  if (p.size() != dim_) throw std::invalid_argument("point dimension mismatch");
  if (gt.has_value() != has_gt() && !empty()) {
    throw std::invalid_argument("ground-truth labels must be given for all points or none");
  }
  coords_.insert(coords_.end(), p.begin(), p.end());
  if (gt) gt_.push_back(*gt);
}

double PointSet::half_bbox_diagonal() const {
  if (size() < 2) return 1.0;
  std::vector<double> lo(dim_, std::numeric_limits<double>::infinity());
  std::vector<double> hi(dim_, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < size(); ++i) {
    const auto p = (*this)[i];
    for (std::size_t d = 0; d < dim_; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  }
  double sq = 0.0;
  for (std::size_t d = 0; d < dim_; ++d) sq += (hi[d] - lo[d]) * (hi[d] - lo[d]);
  const double half = 0.5 * std::sqrt(sq);
  return half > 0.0 ? half : 1.0;
}

ModelClassDescriptor describe(ClassId id, double rep_scale) {
  ModelClassDescriptor d;
  d.id = id;
  d.rep_scale = rep_scale;
  switch (id) {
    case ClassId::Line:
      d.param_dim = 2, d.minimal_sample_size = 2, d.rep_size = 2, d.rep_point_dim = 2, d.ambient_dim = 2;
      break;
    case ClassId::Circle:
      d.param_dim = 3, d.minimal_sample_size = 3, d.rep_size = 2, d.rep_point_dim = 2, d.ambient_dim = 2;
      break;
    case ClassId::Plane:
      d.param_dim = 3, d.minimal_sample_size = 3, d.rep_size = 3, d.rep_point_dim = 3, d.ambient_dim = 3;
      break;
    case ClassId::Cylinder:
      d.param_dim = 7, d.minimal_sample_size = 5, d.rep_size = 3, d.rep_point_dim = 3, d.ambient_dim = 3;
      break;
    case ClassId::Homography:
      d.param_dim = 9, d.minimal_sample_size = 4, d.rep_size = 4, d.rep_point_dim = 2, d.ambient_dim = 4;
      break;
  }
  d.class_weight = static_cast<double>(d.minimal_sample_size);
  return d;
}

std::vector<double> line_params_from_normal(double nx, double ny, double c) {
  const double len = std::hypot(nx, ny);
  if (!(len > 0.0)) throw NonCanonicalizable("line with zero normal");
  Vec2 n(nx / len, ny / len);
  c /= len;
  const double s = canonical_sign(n);
  n *= s;
  c *= s;
  return {std::atan2(n.y(), n.x()), c};
}

std::vector<double> plane_params_from_normal(double nx, double ny, double nz, double offset) {
  Vec3 n(nx, ny, nz);
  const double len = n.norm();
  if (!(len > 0.0)) throw NonCanonicalizable("plane with zero normal");
  n /= len;
  offset /= len;
  const double s = canonical_sign(n);
  n *= s;
  offset *= s;
  return {std::atan2(n.y(), n.x()), std::atan2(n.z(), std::hypot(n.x(), n.y())), offset};
}

std::optional<Instance> estimate(const ModelClassDescriptor& desc, const PointSet& points,
                                 std::span<const std::size_t> sample,
                                 std::span<const double> weights, const Instance* init) {
  if (!weights.empty() && weights.size() != sample.size()) {
    throw std::invalid_argument("weight count does not match sample size");
  }
  if (sample.size() < desc.minimal_sample_size) return std::nullopt;
  try {
    switch (desc.id) {
      case ClassId::Line: return estimate_line(desc, points, sample, weights);
      case ClassId::Circle: return estimate_circle(desc, points, sample, weights);
      case ClassId::Plane: return estimate_plane(desc, points, sample, weights);
      case ClassId::Cylinder: return estimate_cylinder(desc, points, sample, weights, init);
      case ClassId::Homography: return estimate_homography(desc, points, sample, weights);
    }
  } catch (const NonCanonicalizable&) {
    return std::nullopt;
  }
  return std::nullopt;
}

double distance(const ModelClassDescriptor& desc, const Instance& inst, std::span<const double> p) {
  switch (desc.id) {
    case ClassId::Line: return line_distance(inst, p);
    case ClassId::Circle: return circle_distance(inst, p);
    case ClassId::Plane: return plane_distance(inst, p);
    case ClassId::Cylinder: return cylinder_distance(inst, p);
    case ClassId::Homography: return homography_distance(inst, p);
  }
  return std::numeric_limits<double>::infinity();
}

std::vector<double> canonicalize(const ModelClassDescriptor& desc, std::span<const double> params) {
  if (params.size() != desc.param_dim) throw NonCanonicalizable("parameter count mismatch");
  for (double v : params) {
    if (!std::isfinite(v)) throw NonCanonicalizable("non-finite parameter");
  }
  switch (desc.id) {
    case ClassId::Line: return line_rep(desc, params);
    case ClassId::Circle:
      if (!(params[2] >= 0.0)) throw NonCanonicalizable("negative circle radius");
      return {params[0], params[1], params[0] + params[2], params[1]};
    case ClassId::Plane: return plane_rep(desc, params);
    case ClassId::Cylinder: return cylinder_rep(desc, params);
    case ClassId::Homography: return homography_rep(params);
  }
  throw NonCanonicalizable("unknown class");
}

Instance make_instance(const ModelClassDescriptor& desc, std::vector<double> params) {
  Instance inst;
  inst.class_id = desc.id;
  inst.rep = canonicalize(desc, params);
  inst.params = std::move(params);
  return inst;
}

}  // namespace multix
