#include "dataset.hpp"

#include "image_io.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace bsplat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<CameraView> parse_poses(const std::string& text, const std::string& source_name) {
  std::vector<CameraView> views;
  std::set<std::string> ids;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    CameraView v;
    double t[3], q[4], k[4];
    int w = 0, h = 0;
    if (!(ls >> v.id >> t[0] >> t[1] >> t[2] >> q[0] >> q[1] >> q[2] >> q[3] >> k[0] >> k[1] >> k[2] >> k[3] >> w >>
          h)) {
      throw DataError(source_name + ":" + std::to_string(line_no) + ": expected 14 fields");
    }
    std::string extra;
    if (ls >> extra) throw DataError(source_name + ":" + std::to_string(line_no) + ": too many fields");
    if (!ids.insert(v.id).second) throw DataError(source_name + ":" + std::to_string(line_no) + ": duplicate id '" + v.id + "'");
    const Eigen::Quaterniond quat(q[3], q[0], q[1], q[2]);
    if (!(quat.norm() > 0.0)) throw DataError(source_name + ":" + std::to_string(line_no) + ": zero quaternion");
    v.rotation = quat.normalized().toRotationMatrix();
    v.translation = Vec3(t[0], t[1], t[2]);
    v.intrinsics = Intrinsics{k[0], k[1], k[2], k[3], w, h};
    if (!v.translation.allFinite() || !v.rotation.allFinite()) {
      throw DataError(source_name + ":" + std::to_string(line_no) + ": non-finite pose");
    }
    try {
      v.validate();
    } catch (const DataError& e) {
      throw DataError(source_name + ":" + std::to_string(line_no) + ": " + e.what());
    }
    views.push_back(std::move(v));
  }
  return views;
}

std::vector<CameraView> load_poses(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing pose file '" + path.string() + "'");
  return parse_poses(read_text(path), path.string());
}

std::string format_poses(const std::vector<CameraView>& views) {
  std::ostringstream out;
  out << "# id tx ty tz qx qy qz qw fx fy cx cy w h (world-to-camera)\n";
  for (const auto& v : views) {
    const Eigen::Quaterniond q(v.rotation);
    out << v.id << ' ' << fmt(v.translation[0]) << ' ' << fmt(v.translation[1]) << ' ' << fmt(v.translation[2]) << ' '
        << fmt(q.x()) << ' ' << fmt(q.y()) << ' ' << fmt(q.z()) << ' ' << fmt(q.w()) << ' ' << fmt(v.intrinsics.fx)
        << ' ' << fmt(v.intrinsics.fy) << ' ' << fmt(v.intrinsics.cx) << ' ' << fmt(v.intrinsics.cy) << ' '
        << v.intrinsics.width << ' ' << v.intrinsics.height << '\n';
  }
  return out.str();
}

void save_poses(const std::vector<CameraView>& views, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'", 0);
  out << format_poses(views);
}

void attach_images(std::vector<CameraView>& views, const fs::path& image_dir) {
  for (auto& v : views) {
    fs::path p = image_dir / (v.id + ".png");
    if (!fs::exists(p)) p = image_dir / (v.id + ".pfm");
    if (!fs::exists(p)) throw DataError("missing image for view '" + v.id + "' in '" + image_dir.string() + "'");
    v.image = load_image(p);
    if (v.image.width != v.intrinsics.width || v.image.height != v.intrinsics.height) {
      throw DataError("image '" + p.string() + "' is " + std::to_string(v.image.width) + "x" +
                      std::to_string(v.image.height) + ", pose says " + std::to_string(v.intrinsics.width) + "x" +
                      std::to_string(v.intrinsics.height));
    }
  }
}

Partition partition_from_json(const json& doc) {
  Partition p;
  try {
    if (!doc.is_object()) throw ConfigError("partition must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
      if (key != "background_budget" && key != "polygons") throw ConfigError("unknown partition key '" + key + "'");
    }
    p.background_budget = doc.value("background_budget", std::int64_t{0});
    for (const auto& poly : doc.value("polygons", json::array())) {
      SpatialPolygon sp;
      sp.id = poly.at("id").get<int>();
      sp.target_budget = poly.at("target_budget").get<std::int64_t>();
      for (const auto& v : poly.at("vertices")) {
        if (!v.is_array() || v.size() != 2) throw ConfigError("polygon vertices must be [x, y] pairs");
        sp.vertices.emplace_back(v[0].get<double>(), v[1].get<double>());
      }
      p.polygons.push_back(std::move(sp));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed partition: ") + e.what());
  }
  p.validate();
  return p;
}

json partition_to_json(const Partition& partition) {
  json polys = json::array();
  for (const auto& poly : partition.polygons) {
    json verts = json::array();
    for (const auto& v : poly.vertices) verts.push_back({v.x(), v.y()});
    polys.push_back({{"id", poly.id}, {"target_budget", poly.target_budget}, {"vertices", verts}});
  }
  return {{"background_budget", partition.background_budget}, {"polygons", polys}};
}

Partition load_partition(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open partition '" + path.string() + "'");
  try {
    return partition_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("partition '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void save_partition(const Partition& partition, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'", 0);
  out << partition_to_json(partition).dump(2) << '\n';
}

std::vector<std::pair<int, std::int64_t>> parse_budget_spec(const std::string& spec) {
  std::string body = spec;
  if (body.rfind("region=", 0) == 0) body = body.substr(7);
  std::vector<std::pair<int, std::int64_t>> out;
  std::istringstream in(body);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("budget entry '" + item + "' must be id:count");
    int id = 0;
    long long count = 0;
    try {
      std::size_t used = 0;
      id = std::stoi(item.substr(0, colon), &used);
      if (used != colon) throw std::invalid_argument("id");
      const std::string c = item.substr(colon + 1);
      count = std::stoll(c, &used);
      if (used != c.size()) throw std::invalid_argument("count");
    } catch (const std::exception&) {
      throw ConfigError("budget entry '" + item + "' must be id:count with integers");
    }
    if (id < 0) throw ConfigError("budget region id " + std::to_string(id) + " is negative");
    if (count < 0) throw ConfigError("budget for region " + std::to_string(id) + " is negative");
    out.emplace_back(id, count);
  }
  if (out.empty()) throw ConfigError("empty budget override");
  return out;
}

void apply_budget_override(Partition& partition, const std::string& spec) {
  for (const auto& [id, count] : parse_budget_spec(spec)) {
    try {
      partition.set_target(id, count);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory '" + dir.string() + "' does not exist");
  Dataset d;
  d.primary = load_poses(dir / "poses.txt");
  attach_images(d.primary, dir / "images");
  for (auto& v : d.primary) v.source = kPrimarySensor;
  if (fs::exists(dir / "aux_poses.txt")) {
    d.aux = load_poses(dir / "aux_poses.txt");
    attach_images(d.aux, dir / "aux_images");
    for (auto& v : d.aux) v.source = 1;
  }
  if (fs::exists(dir / "heldout_poses.txt")) {
    d.heldout = load_poses(dir / "heldout_poses.txt");
    attach_images(d.heldout, dir / "heldout_images");
  }
  if (fs::exists(dir / "points.ply")) d.points = load_point_cloud(dir / "points.ply");
  if (fs::exists(dir / "partition.json")) d.partition = load_partition(dir / "partition.json");
  return d;
}

namespace {
void save_view_set(const std::vector<CameraView>& views, const fs::path& poses, const fs::path& image_dir) {
  save_poses(views, poses);
  fs::create_directories(image_dir);
  for (const auto& v : views) save_png(v.image, image_dir / (v.id + ".png"));
}
}  // namespace

void save_dataset(const Dataset& data, const fs::path& dir) {
  fs::create_directories(dir);
  save_view_set(data.primary, dir / "poses.txt", dir / "images");
  if (!data.aux.empty()) save_view_set(data.aux, dir / "aux_poses.txt", dir / "aux_images");
  if (!data.heldout.empty()) save_view_set(data.heldout, dir / "heldout_poses.txt", dir / "heldout_images");
  if (data.points) save_point_cloud(*data.points, dir / "points.ply");
  if (data.partition) save_partition(*data.partition, dir / "partition.json");
}

}  // namespace bsplat
