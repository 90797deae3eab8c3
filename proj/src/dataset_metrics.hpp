#pragma once

#include "common.hpp"

#include <optional>

namespace bsplat {

// Floor-plane region the coverage grid is laid over.
struct Envelope {
  enum class Kind { BoundingBox, Rectangle, Polygon };
  Kind kind = Kind::BoundingBox;
  Vec2 min = Vec2::Zero();  // Rectangle
  Vec2 max = Vec2::Zero();
  std::vector<Vec2> polygon;  // Polygon

  static Envelope bounding_box() { return {}; }
  static Envelope rectangle(const Vec2& lo, const Vec2& hi);
  static Envelope from_polygon(std::vector<Vec2> vertices);
};

struct CoverageGrid {
  Vec2 origin = Vec2::Zero();
  double cell = 0.2;
  int nx = 0;
  int ny = 0;
  std::int64_t min_poses = 6;
  std::vector<std::int64_t> counts;  // row-major, iy * nx + ix
  std::vector<bool> in_envelope;
  std::int64_t total_cells = 0;
  std::int64_t occupied_cells = 0;
  std::int64_t binned_poses = 0;  // poses that landed in an envelope cell
  double coverage = 0.0;
  std::string warning;  // set when the result is degenerate, e.g. no poses
};

// Cells are half-open [x0 + i*cell, x0 + (i+1)*cell) anchored at the
// envelope minimum. The bounding box of the poses gets floor(w/cell) + 1
// columns so the maximum pose is binned; a rectangle gets ceil(w/cell);
// a polygon keeps the cells of its bounding box whose centers lie inside.
// A cell is occupied when it holds strictly more than `min_poses` poses.
// Poses outside the envelope are ignored.
CoverageGrid coverage_grid(const std::vector<Vec3>& positions, const Envelope& envelope = {}, double cell = 0.2,
                           std::int64_t min_poses = 6);

double coverage(const std::vector<Vec3>& positions, const Envelope& envelope = {}, double cell = 0.2,
                std::int64_t min_poses = 6);

// Images per square meter, the literal ratio.
double idsm(std::int64_t image_count, double area_m2);

// Floor area of the envelope as used by the grid (cell area times cells).
double envelope_area(const CoverageGrid& grid);

// Camera positions from a trajectory: 3 columns `x y z`, 8 columns
// `time x y z qx qy qz qw` (camera-to-world), or the 14-column pose format
// (world-to-camera, center = -R^T t). '#' comments allowed.
std::vector<Vec3> parse_trajectory(const std::string& text);
std::vector<Vec3> load_trajectory(const std::string& path);

// ix,iy,x_min,y_min,count,occupied for each envelope cell.
std::string histogram_csv(const CoverageGrid& grid);

}  // namespace bsplat
