#include "scene.hpp"

#include "image_io.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace bsplat {

int GaussianPrimitive::principal_axis() const {
  int q = 0;
  for (int k = 1; k < 3; ++k) {
    if (log_scale[k] > log_scale[q]) q = k;
  }
  return q;
}

Mat3 quaternion_to_matrix(const Vec4& q_raw) {
  const Vec4 q = q_raw / q_raw.norm();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Mat3 GaussianPrimitive::rotation_matrix() const { return quaternion_to_matrix(rotation); }

void GaussianPrimitive::normalize_rotation() {
  const double n = rotation.norm();
  if (n > 0.0 && std::isfinite(n)) {
    rotation /= n;
  } else {
    rotation = Vec4(1.0, 0.0, 0.0, 0.0);
  }
}

bool GaussianPrimitive::finite() const {
  return mean.allFinite() && log_scale.allFinite() && rotation.allFinite() &&
         std::isfinite(opacity_logit) && color_dc.allFinite() && rotation.norm() > 0.0;
}

// ---------------------------------------------------------------------------
// Polygons

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

bool on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  if (std::abs(cross(a, b, p)) > 1e-12 * std::max(1.0, (b - a).squaredNorm())) return false;
  return p.x() >= std::min(a.x(), b.x()) - 1e-12 && p.x() <= std::max(a.x(), b.x()) + 1e-12 &&
         p.y() >= std::min(a.y(), b.y()) - 1e-12 && p.y() <= std::max(a.y(), b.y()) + 1e-12;
}

// True when the open segments cross at a single interior point.
bool segments_cross(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

bool on_boundary(const SpatialPolygon& poly, const Vec2& p) {
  const auto& v = poly.vertices;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if (on_segment(p, v[j], v[i])) return true;
  }
  return false;
}

bool strictly_inside(const SpatialPolygon& poly, const Vec2& p) {
  return poly.contains(p) && !on_boundary(poly, p);
}

// Some point of the polygon's interior.
Vec2 interior_point(const SpatialPolygon& poly) {
  const auto& v = poly.vertices;
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : v) centroid += p;
  centroid /= static_cast<double>(v.size());
  if (strictly_inside(poly, centroid)) return centroid;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 2; j < v.size(); ++j) {
      const Vec2 mid = 0.5 * (v[i] + v[j]);
      if (strictly_inside(poly, mid)) return mid;
    }
  }
  return v.front();
}

bool overlaps(const SpatialPolygon& a, const SpatialPolygon& b) {
  const auto& va = a.vertices;
  const auto& vb = b.vertices;
  for (std::size_t i = 0, j = va.size() - 1; i < va.size(); j = i++) {
    for (std::size_t k = 0, l = vb.size() - 1; k < vb.size(); l = k++) {
      if (segments_cross(va[j], va[i], vb[l], vb[k])) return true;
    }
  }
  auto probes_inside = [](const SpatialPolygon& outer, const SpatialPolygon& inner) {
    const auto& v = inner.vertices;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
      if (strictly_inside(outer, v[i]) || strictly_inside(outer, 0.5 * (v[i] + v[j]))) return true;
    }
    return strictly_inside(outer, interior_point(inner));
  };
  return probes_inside(a, b) || probes_inside(b, a);
}

}  // namespace

bool SpatialPolygon::contains(const Vec2& p) const {
  bool inside = false;
  const auto& v = vertices;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i].y() > p.y()) != (v[j].y() > p.y())) {
      const double x_cross = (v[j].x() - v[i].x()) * (p.y() - v[i].y()) / (v[j].y() - v[i].y()) + v[i].x();
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

double SpatialPolygon::area() const {
  double twice = 0.0;
  for (std::size_t i = 0, j = vertices.size() - 1; i < vertices.size(); j = i++) {
    twice += vertices[j].x() * vertices[i].y() - vertices[i].x() * vertices[j].y();
  }
  return 0.5 * std::abs(twice);
}

bool SpatialPolygon::is_simple() const {
  const auto n = vertices.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = vertices[i];
    const Vec2& b = vertices[(i + 1) % n];
    if ((a - b).squaredNorm() == 0.0) return false;
    for (std::size_t k = i + 1; k < n; ++k) {
      const bool adjacent = k == i + 1 || (i == 0 && k == n - 1);
      if (adjacent) continue;
      const Vec2& c = vertices[k];
      const Vec2& d = vertices[(k + 1) % n];
      if (segments_cross(a, b, c, d) || on_segment(c, a, b) || on_segment(d, a, b) || on_segment(a, c, d) ||
          on_segment(b, c, d)) {
        return false;
      }
    }
  }
  return area() > 0.0;
}

void Partition::validate() const {
  std::set<int> ids;
  for (const auto& poly : polygons) {
    if (poly.id < 1) {
      throw ConfigError("polygon id " + std::to_string(poly.id) + " is invalid (ids start at 1)");
    }
    if (!ids.insert(poly.id).second) throw ConfigError("duplicate polygon id " + std::to_string(poly.id));
    if (poly.vertices.size() < 3) {
      throw ConfigError("polygon " + std::to_string(poly.id) + " has fewer than 3 vertices");
    }
    for (const auto& v : poly.vertices) {
      if (!v.allFinite()) throw ConfigError("polygon " + std::to_string(poly.id) + " has a non-finite vertex");
    }
    if (!poly.is_simple()) throw ConfigError("polygon " + std::to_string(poly.id) + " is not simple");
    if (poly.target_budget < 0) {
      throw ConfigError("polygon " + std::to_string(poly.id) + " has a negative target budget");
    }
  }
  if (background_budget < 0) throw ConfigError("background budget is negative");
  for (std::size_t i = 0; i < polygons.size(); ++i) {
    for (std::size_t j = i + 1; j < polygons.size(); ++j) {
      if (overlaps(polygons[i], polygons[j])) {
        std::ostringstream msg;
        msg << "polygons " << polygons[i].id << " and " << polygons[j].id << " overlap";
        throw ConfigError(msg.str());
      }
    }
  }
}

int Partition::region_of(const Vec2& xy) const {
  for (const auto& poly : polygons) {
    if (poly.contains(xy)) return poly.id;
  }
  return kBackground;
}

std::vector<int> Partition::region_ids() const {
  std::vector<int> ids{kBackground};
  for (const auto& poly : polygons) ids.push_back(poly.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::int64_t Partition::target(int region) const {
  if (region == kBackground) return background_budget;
  for (const auto& poly : polygons) {
    if (poly.id == region) return poly.target_budget;
  }
  throw InvalidArgument("unknown region id " + std::to_string(region));
}

void Partition::set_target(int region, std::int64_t budget) {
  if (budget < 0) throw ConfigError("negative budget for region " + std::to_string(region));
  if (region == kBackground) {
    background_budget = budget;
    return;
  }
  for (auto& poly : polygons) {
    if (poly.id == region) {
      poly.target_budget = budget;
      return;
    }
  }
  throw ConfigError("budget given for unknown region " + std::to_string(region));
}

std::int64_t Partition::total_budget() const {
  std::int64_t total = background_budget;
  for (const auto& poly : polygons) total += poly.target_budget;
  return total;
}

void assign_to_polygons(Scene& scene) {
  scene.partition.validate();
  scene.assignment.resize(scene.primitives.size());
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    scene.assignment[i] = scene.partition.region_of(scene.primitives[i].mean.head<2>());
  }
}

std::map<int, std::int64_t> region_counts(const Scene& scene) {
  std::map<int, std::int64_t> counts;
  for (int id : scene.partition.region_ids()) counts[id] = 0;
  for (int id : scene.assignment) ++counts[id];
  return counts;
}

// ---------------------------------------------------------------------------
// Cameras

void CameraView::validate() const {
  const auto& k = intrinsics;
  if (k.width <= 0 || k.height <= 0) throw DataError("view '" + id + "' has a zero-area image");
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) throw DataError("view '" + id + "' has non-positive focal length");
  if (!(k.cx >= 0.0 && k.cx < k.width) || !(k.cy >= 0.0 && k.cy < k.height)) {
    throw DataError("view '" + id + "' has its principal point outside the image");
  }
  if (!rotation.allFinite() || !translation.allFinite()) throw DataError("view '" + id + "' has a non-finite pose");
  if (!image.empty() && (image.width != k.width || image.height != k.height || image.channels != 3)) {
    throw DataError("view '" + id + "' image shape does not match its intrinsics");
  }
}

CameraView CameraView::downsampled(int factor) const {
  if (factor < 1) throw InvalidArgument("downsample factor must be >= 1");
  if (factor == 1) return *this;
  CameraView out = *this;
  const int w = intrinsics.width / factor;
  const int h = intrinsics.height / factor;
  if (w == 0 || h == 0) throw DataError("view '" + id + "' is too small to downsample");
  out.intrinsics.width = w;
  out.intrinsics.height = h;
  out.intrinsics.fx = intrinsics.fx / factor;
  out.intrinsics.fy = intrinsics.fy / factor;
  // Pixel centers sit at integer coordinates; block (f*i .. f*i+f-1) has its
  // center at f*i + (f-1)/2.
  out.intrinsics.cx = (intrinsics.cx - 0.5 * (factor - 1)) / factor;
  out.intrinsics.cy = (intrinsics.cy - 0.5 * (factor - 1)) / factor;
  if (!image.empty()) out.image = box_downsample(image, factor);
  return out;
}

CameraView look_at(const Vec3& eye, const Vec3& target, const Vec3& up, const Intrinsics& intr) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  CameraView view;
  view.intrinsics = intr;
  view.rotation.row(0) = right.transpose();
  view.rotation.row(1) = down.transpose();
  view.rotation.row(2) = forward.transpose();
  view.translation = -view.rotation * eye;
  return view;
}

}  // namespace bsplat
