#pragma once

#include "scene.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace bsplat {

enum class PlyPrecision { Float32, Float64 };

// Binary little-endian PLY in the layout 3DGS viewers expect:
// x y z nx ny nz f_dc_0..2 opacity scale_0..2 rot_0..3.
// Float64 round-trips bit-exactly; Float32 is for third-party viewers.
void save_scene(const Scene& scene, const std::filesystem::path& path,
                PlyPrecision precision = PlyPrecision::Float64);

// Reads float or double properties, ignores extra ones (f_rest_*, normals).
// Malformed header, missing fields, truncated data and non-finite values
// raise IoError carrying the byte offset.
Scene load_scene(const std::filesystem::path& path);

struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;  // empty when the file has no color
};

// Seed point cloud: x y z with optional red/green/blue (uchar or float).
PointCloud load_point_cloud(const std::filesystem::path& path);
void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path);

}  // namespace bsplat
