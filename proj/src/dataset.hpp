#pragma once

#include "ply.hpp"
#include "scene.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>

namespace bsplat {

// One line per view: `id tx ty tz qx qy qz qw fx fy cx cy w h`, the pose
// being world-to-camera. Blank lines and lines starting with '#' are skipped.
std::vector<CameraView> parse_poses(const std::string& text, const std::string& source_name);
std::vector<CameraView> load_poses(const std::filesystem::path& path);
std::string format_poses(const std::vector<CameraView>& views);
void save_poses(const std::vector<CameraView>& views, const std::filesystem::path& path);

// Loads images/<id>.png (or .pfm) for each view from `image_dir`.
void attach_images(std::vector<CameraView>& views, const std::filesystem::path& image_dir);

Partition partition_from_json(const nlohmann::json& doc);
nlohmann::json partition_to_json(const Partition& partition);
Partition load_partition(const std::filesystem::path& path);
void save_partition(const Partition& partition, const std::filesystem::path& path);

// Applies `region=id:count,...` or `id:count,...` overrides (id 0 is the
// background).
std::vector<std::pair<int, std::int64_t>> parse_budget_spec(const std::string& spec);
void apply_budget_override(Partition& partition, const std::string& spec);

// Directory layout:
//   poses.txt + images/                 primary views (required)
//   aux_poses.txt + aux_images/         auxiliary sensor views (optional)
//   heldout_poses.txt + heldout_images/ evaluation views (optional)
//   points.ply                          seed point cloud (optional)
//   partition.json                      polygons and budgets (optional)
struct Dataset {
  std::vector<CameraView> primary;
  std::vector<CameraView> aux;
  std::vector<CameraView> heldout;
  std::optional<PointCloud> points;
  std::optional<Partition> partition;
};

Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& data, const std::filesystem::path& dir);

}  // namespace bsplat
