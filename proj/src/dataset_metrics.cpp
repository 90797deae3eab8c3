#include "dataset_metrics.hpp"

#include "scene.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace bsplat {

Envelope Envelope::rectangle(const Vec2& lo, const Vec2& hi) {
  Envelope e;
  e.kind = Kind::Rectangle;
  e.min = lo;
  e.max = hi;
  return e;
}

Envelope Envelope::from_polygon(std::vector<Vec2> vertices) {
  Envelope e;
  e.kind = Kind::Polygon;
  e.polygon = std::move(vertices);
  return e;
}

namespace {

// Half-open bin index, corrected so that the computed cell edges agree with
// the floating-point comparison x0 + i*cell <= x < x0 + (i+1)*cell.
std::int64_t bin(double x, double x0, double cell) {
  auto i = static_cast<std::int64_t>(std::floor((x - x0) / cell));
  if (x0 + static_cast<double>(i) * cell > x) --i;
  if (x0 + static_cast<double>(i + 1) * cell <= x) ++i;
  return i;
}

}  // namespace

CoverageGrid coverage_grid(const std::vector<Vec3>& positions, const Envelope& envelope, double cell,
                           std::int64_t min_poses) {
  if (!(cell > 0.0) || !std::isfinite(cell)) throw ConfigError("coverage cell size must be > 0");
  if (min_poses < 0) throw ConfigError("min_poses must be >= 0");
  for (const auto& p : positions) {
    if (!p.allFinite()) throw DataError("non-finite camera position");
  }

  CoverageGrid g;
  g.cell = cell;
  g.min_poses = min_poses;
  std::optional<SpatialPolygon> poly;

  switch (envelope.kind) {
    case Envelope::Kind::BoundingBox: {
      if (positions.empty()) {
        g.warning = "no poses; coverage is 0";
        return g;
      }
      Vec2 lo = positions[0].head<2>(), hi = lo;
      for (const auto& p : positions) {
        lo = lo.cwiseMin(p.head<2>());
        hi = hi.cwiseMax(p.head<2>());
      }
      g.origin = lo;
      g.nx = static_cast<int>(std::floor((hi.x() - lo.x()) / cell)) + 1;
      g.ny = static_cast<int>(std::floor((hi.y() - lo.y()) / cell)) + 1;
      // the max pose must land inside even when the division rounds down
      if (bin(hi.x(), lo.x(), cell) >= g.nx) g.nx = static_cast<int>(bin(hi.x(), lo.x(), cell)) + 1;
      if (bin(hi.y(), lo.y(), cell) >= g.ny) g.ny = static_cast<int>(bin(hi.y(), lo.y(), cell)) + 1;
      break;
    }
    case Envelope::Kind::Rectangle: {
      const Vec2 size = envelope.max - envelope.min;
      if (!envelope.min.allFinite() || !envelope.max.allFinite() || !(size.x() > 0.0) || !(size.y() > 0.0)) {
        throw ConfigError("coverage envelope rectangle has no area");
      }
      g.origin = envelope.min;
      g.nx = static_cast<int>(std::ceil(size.x() / cell - 1e-9));
      g.ny = static_cast<int>(std::ceil(size.y() / cell - 1e-9));
      break;
    }
    case Envelope::Kind::Polygon: {
      SpatialPolygon sp;
      sp.id = 1;
      sp.vertices = envelope.polygon;
      if (sp.vertices.size() < 3 || !sp.is_simple()) throw ConfigError("coverage envelope polygon is degenerate");
      Vec2 lo = sp.vertices[0], hi = lo;
      for (const auto& v : sp.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
      }
      g.origin = lo;
      g.nx = static_cast<int>(std::ceil((hi.x() - lo.x()) / cell - 1e-9));
      g.ny = static_cast<int>(std::ceil((hi.y() - lo.y()) / cell - 1e-9));
      poly = std::move(sp);
      break;
    }
  }

  const std::size_t n = static_cast<std::size_t>(g.nx) * static_cast<std::size_t>(g.ny);
  g.counts.assign(n, 0);
  g.in_envelope.assign(n, true);
  if (poly) {
    for (int iy = 0; iy < g.ny; ++iy) {
      for (int ix = 0; ix < g.nx; ++ix) {
        const Vec2 c = g.origin + Vec2((ix + 0.5) * cell, (iy + 0.5) * cell);
        g.in_envelope[static_cast<std::size_t>(iy) * g.nx + ix] = poly->contains(c);
      }
    }
  }
  for (bool b : g.in_envelope) g.total_cells += b ? 1 : 0;
  if (g.total_cells == 0) throw ConfigError("coverage envelope contains no whole cell centers");

  for (const auto& p : positions) {
    const std::int64_t ix = bin(p.x(), g.origin.x(), cell);
    const std::int64_t iy = bin(p.y(), g.origin.y(), cell);
    if (ix < 0 || iy < 0 || ix >= g.nx || iy >= g.ny) continue;
    const std::size_t k = static_cast<std::size_t>(iy) * g.nx + static_cast<std::size_t>(ix);
    if (!g.in_envelope[k]) continue;
    ++g.counts[k];
    ++g.binned_poses;
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (g.in_envelope[k] && g.counts[k] > min_poses) ++g.occupied_cells;
  }
  g.coverage = static_cast<double>(g.occupied_cells) / static_cast<double>(g.total_cells);
  if (positions.empty()) g.warning = "no poses; coverage is 0";
  return g;
}

double coverage(const std::vector<Vec3>& positions, const Envelope& envelope, double cell, std::int64_t min_poses) {
  return coverage_grid(positions, envelope, cell, min_poses).coverage;
}

double idsm(std::int64_t image_count, double area_m2) {
  if (!(area_m2 > 0.0) || !std::isfinite(area_m2)) throw InvalidArgument("IDSM needs a positive area");
  if (image_count < 0) throw InvalidArgument("image count must be >= 0");
  return static_cast<double>(image_count) / area_m2;
}

double envelope_area(const CoverageGrid& grid) {
  return static_cast<double>(grid.total_cells) * grid.cell * grid.cell;
}

std::vector<Vec3> parse_trajectory(const std::string& text) {
  std::vector<Vec3> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::vector<std::string> fields;
    for (std::string f; ls >> f;) fields.push_back(f);
    auto num = [&](std::size_t i) {
      try {
        std::size_t used = 0;
        const double v = std::stod(fields[i], &used);
        if (used != fields[i].size()) throw std::invalid_argument("trailing");
        return v;
      } catch (const std::exception&) {
        throw DataError("trajectory line " + std::to_string(line_no) + ": '" + fields[i] + "' is not a number");
      }
    };
    if (fields.size() == 3) {
      out.emplace_back(num(0), num(1), num(2));
    } else if (fields.size() == 8) {
      out.emplace_back(num(1), num(2), num(3));
    } else if (fields.size() == 14) {
      const Vec3 t(num(1), num(2), num(3));
      const Eigen::Quaterniond q(num(7), num(4), num(5), num(6));
      if (!(q.norm() > 0.0)) throw DataError("trajectory line " + std::to_string(line_no) + ": zero quaternion");
      out.push_back(-(q.normalized().toRotationMatrix().transpose() * t));
    } else {
      throw DataError("trajectory line " + std::to_string(line_no) + ": expected 3, 8 or 14 fields, got " +
                      std::to_string(fields.size()));
    }
    if (!out.back().allFinite()) throw DataError("trajectory line " + std::to_string(line_no) + ": non-finite position");
  }
  return out;
}

std::vector<Vec3> load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trajectory '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_trajectory(ss.str());
}

std::string histogram_csv(const CoverageGrid& grid) {
  std::ostringstream out;
  out << "ix,iy,x_min,y_min,count,occupied\n";
  char buf[64];
  for (int iy = 0; iy < grid.ny; ++iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const std::size_t k = static_cast<std::size_t>(iy) * grid.nx + ix;
      if (!grid.in_envelope[k]) continue;
      out << ix << ',' << iy << ',';
      std::snprintf(buf, sizeof buf, "%.17g,%.17g", grid.origin.x() + ix * grid.cell, grid.origin.y() + iy * grid.cell);
      out << buf << ',' << grid.counts[k] << ',' << (grid.counts[k] > grid.min_poses ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

}  // namespace bsplat
