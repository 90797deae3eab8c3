#pragma once

#include "common.hpp"

#include <map>
#include <string>
#include <vector>

namespace bsplat {

// Degree-0 spherical harmonic basis constant; rgb = 0.5 + kShC0 * dc.
inline constexpr double kShC0 = 0.28209479177387814;

// Per-primitive statistics gathered between two densification events.
struct AccumulatedStats {
  double sum_abs_pixel_grad = 0.0;
  std::int64_t sum_footprint_pixels = 0;
  double max_effective_opacity = 0.0;
  bool observed = false;

  // Baseline signal for ablations: sum over views of the norm of the signed,
  // pixel-summed projected-mean gradient, and the number of views it covers.
  double sum_signed_grad_norm = 0.0;
  std::int64_t visible_views = 0;

  void reset() { *this = AccumulatedStats{}; }
};

struct GaussianPrimitive {
  Vec3 mean = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Vec4 rotation{1.0, 0.0, 0.0, 0.0};  // (w, x, y, z)
  double opacity_logit = 0.0;
  Vec3 color_dc = Vec3::Zero();
  AccumulatedStats stats;

  double opacity() const { return sigmoid(opacity_logit); }
  void set_opacity(double alpha) { opacity_logit = logit(alpha); }
  Vec3 scale() const { return log_scale.array().exp(); }
  Vec3 rgb() const { return (color_dc * kShC0).array() + 0.5; }
  void set_rgb(const Vec3& rgb) { color_dc = (rgb.array() - 0.5) / kShC0; }

  // Index of the largest scale axis; ties go to the lowest index.
  int principal_axis() const;
  Mat3 rotation_matrix() const;
  void normalize_rotation();
  bool finite() const;
};

// Rotation matrix of a (w, x, y, z) quaternion, normalized first.
Mat3 quaternion_to_matrix(const Vec4& q);

struct SpatialPolygon {
  int id = 0;
  std::vector<Vec2> vertices;
  std::int64_t target_budget = 0;

  // Half-open crossing test: a point on an edge shared by two adjacent
  // polygons belongs to exactly one of them.
  bool contains(const Vec2& p) const;
  double area() const;
  bool is_simple() const;
};

// Floor-plane partition: polygons 1..M plus the implicit background (id 0).
struct Partition {
  std::vector<SpatialPolygon> polygons;
  std::int64_t background_budget = 0;

  static constexpr int kBackground = 0;

  // Throws ConfigError on bad ids, < 3 vertices, self-intersection, or an
  // overlapping pair (both ids named in the message).
  void validate() const;
  int region_of(const Vec2& xy) const;
  std::vector<int> region_ids() const;  // ascending, background first
  std::int64_t target(int region) const;
  void set_target(int region, std::int64_t budget);
  std::int64_t total_budget() const;
};

struct Scene {
  std::vector<GaussianPrimitive> primitives;
  Partition partition;
  std::vector<int> assignment;  // region id per primitive

  std::size_t size() const { return primitives.size(); }
};

// Sets every primitive's region by point-in-polygon on mean.xy. Validates the
// partition first. Idempotent.
void assign_to_polygons(Scene& scene);

// Counts per region id; every region of the partition is present (maybe 0).
std::map<int, std::int64_t> region_counts(const Scene& scene);

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
};

// Sensor tag: 0 is the primary sensor, k >= 1 is auxiliary sensor k.
using SensorSource = int;
inline constexpr SensorSource kPrimarySensor = 0;

struct CameraView {
  std::string id;
  Intrinsics intrinsics;
  Mat3 rotation = Mat3::Identity();  // world-to-camera
  Vec3 translation = Vec3::Zero();
  Image image;
  SensorSource source = kPrimarySensor;
  double weight = 1.0;

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  Vec3 center() const { return -rotation.transpose() * translation; }
  // Throws DataError when fx/fy/cx/cy or the image shape is inconsistent.
  void validate() const;
  // Same camera with the image box-filtered by `factor` and intrinsics
  // rescaled to match.
  CameraView downsampled(int factor) const;
};

// Camera at `eye` looking at `target`, OpenCV axes (x right, y down, z forward).
CameraView look_at(const Vec3& eye, const Vec3& target, const Vec3& up, const Intrinsics& intr);

}  // namespace bsplat
