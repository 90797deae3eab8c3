#include "fixtures.hpp"

#include "image_io.hpp"
#include "render.hpp"
#include "ply.hpp"
#include "rng.hpp"

#include <cmath>
#include <fstream>

namespace bsplat::fixtures {

namespace fs = std::filesystem;

Vec3 quad_texture(double x, double y) {
  auto band = [](double v) { return 0.15 + 0.45 * (0.5 + 0.5 * v); };
  return Vec3(band(std::sin(3.1 * x + 0.7 * y + 1.0)), band(std::cos(2.3 * y - 1.7 * x * x)),
              band(std::sin(4.0 * (x + y)) * std::cos(1.3 * x)));
}

Scene quad_ground_truth() {
  Scene s;
  const int n = 40;
  const double step = 2.0 / n;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      GaussianPrimitive g;
      g.mean = Vec3(-1.0 + (i + 0.5) * step, -1.0 + (j + 0.5) * step, 0.0);
      g.log_scale = Vec3(std::log(0.7 * step), std::log(0.7 * step), std::log(0.005));
      g.set_opacity(0.9);
      g.set_rgb(quad_texture(g.mean.x(), g.mean.y()));
      s.primitives.push_back(g);
    }
  }
  s.assignment.assign(s.size(), 0);
  return s;
}

CameraView quad_camera(const std::string& id, const Vec3& eye, int size) {
  Intrinsics k;
  k.width = size;
  k.height = size;
  k.fx = k.fy = 72.0 * size / 64.0;
  k.cx = k.cy = size / 2.0;
  CameraView v = look_at(eye, Vec3(0.4 * eye.x(), 0.4 * eye.y(), 0.0), Vec3(0, 1, 0), k);
  v.id = id;
  return v;
}

namespace {

Partition quad_partition() {
  Partition p;
  SpatialPolygon roi;
  roi.id = 1;
  roi.target_budget = 1200;
  roi.vertices = {{-1.5, -1.5}, {0.0, -1.5}, {0.0, 1.5}, {-1.5, 1.5}};
  p.polygons.push_back(roi);
  p.background_budget = 800;
  return p;
}

void render_into(std::vector<CameraView>& views, const Scene& truth) {
  for (auto& v : views) v.image = render(truth, v, Vec3::Zero()).image;
}

}  // namespace

Dataset quad_dataset() {
  const Scene truth = quad_ground_truth();
  Dataset d;
  d.primary = {quad_camera("train_0", Vec3(0.25, 0.10, 2.60)), quad_camera("train_1", Vec3(-0.30, 0.15, 2.55)),
               quad_camera("train_2", Vec3(0.05, -0.30, 2.65))};
  d.heldout = {quad_camera("test_0", Vec3(0.00, 0.00, 2.60)), quad_camera("test_1", Vec3(0.20, -0.15, 2.50)),
               quad_camera("test_2", Vec3(-0.15, -0.10, 2.70))};
  render_into(d.primary, truth);
  render_into(d.heldout, truth);
  // PNG round trip so in-memory and on-disk fixtures agree
  for (auto* set : {&d.primary, &d.heldout})
    for (auto& v : *set) v.image = quantize8(v.image);

  Rng rng(7);
  PointCloud cloud;
  for (int i = 0; i < 300; ++i) {
    const Vec3 p(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.normal(0.0, 0.01));
    cloud.positions.push_back(p);
    Vec3 c = quad_texture(p.x(), p.y());
    for (int ch = 0; ch < 3; ++ch) c[ch] = std::clamp(c[ch] + rng.normal(0.0, 0.05), 0.0, 1.0);
    cloud.colors.push_back(c);
  }
  d.points = cloud;
  d.partition = quad_partition();
  return d;
}

TrainConfig quad_config() {
  TrainConfig c;
  c.total_iters = 600;
  c.schedule = {100, 500, 100};
  c.init.opacity = 0.5;
  c.suite.opacity_prune_threshold = 0.005;  // same level as the raw-opacity baseline
  c.log_interval = 50;
  c.seed = 1;
  return c;
}

PollutedDataset polluted_dataset() {
  PollutedDataset out;
  out.data = quad_dataset();
  const Scene truth = quad_ground_truth();
  for (int i = 0; i < 6; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 6.0;
    CameraView v = quad_camera("aux_" + std::to_string(i), Vec3(0.35 * std::cos(a), 0.35 * std::sin(a), 2.5));
    v.source = 1;
    v.image = render(truth, v, Vec3::Zero()).image;
    out.data.aux.push_back(v);
  }
  RadiometricTransform gain, bias, cross;
  gain.gain = Vec3(1.5, 1.0, 1.0).asDiagonal();
  bias.bias = Vec3::Constant(0.25);
  cross.gain = Mat3::Constant(0.3);
  cross.gain.diagonal().setOnes();
  const std::pair<int, RadiometricTransform> plan[] = {{1, gain}, {3, bias}, {4, cross}};
  for (const auto& [idx, t] : plan) {
    CameraView& v = out.data.aux[static_cast<std::size_t>(idx)];
    RadiometricTransform tt = t;
    tt.view_id = v.id;
    v.image = tt.apply(v.image);
    out.injected.push_back({v.id, tt});
  }
  for (auto& v : out.data.aux) v.image = quantize8(v.image);
  return out;
}

OcclusionScene occlusion_scene() {
  OcclusionScene o;
  Rng rng(23);
  auto add = [&](const Vec3& mean, double scale, double opacity, const Vec3& rgb) {
    GaussianPrimitive g;
    g.mean = mean;
    g.log_scale = Vec3::Constant(std::log(scale));
    g.set_opacity(opacity);
    g.set_rgb(rgb);
    o.scene.primitives.push_back(g);
  };
  auto color = [&] { return Vec3(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)); };
  for (int i = 0; i < 68; ++i) {
    add(Vec3(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(1.8, 2.2)), rng.uniform(0.015, 0.025),
        rng.uniform(0.5, 0.9), color());
  }
  // Two full-frame layers clamped at alpha 0.99: T drops to 1.0000000000000018e-4,
  // just above the stop, so anything behind terminates the pixel uncomposited.
  for (int layer = 0; layer < 2; ++layer) {
    GaussianPrimitive g;
    g.mean = Vec3(0.0, 0.0, 4.0 + 0.02 * layer);
    g.log_scale = Vec3(std::log(500.0), std::log(500.0), std::log(0.01));
    g.set_opacity(0.999999);
    g.set_rgb(layer == 0 ? Vec3(0.3, 0.35, 0.4) : Vec3(0.6, 0.2, 0.2));
    o.scene.primitives.push_back(g);
  }
  for (int i = 0; i < 30; ++i) {
    o.hidden.push_back(o.scene.size());
    add(Vec3(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(5.5, 7.0)), rng.uniform(0.05, 0.15),
        rng.uniform(0.3, 0.95), color());
  }
  o.scene.assignment.assign(o.scene.size(), 0);
  o.scene.partition.background_budget = static_cast<std::int64_t>(o.scene.size());

  Intrinsics k;
  k.width = k.height = 64;
  k.fx = k.fy = 64.0;
  k.cx = k.cy = 32.0;
  for (int i = 0; i < 3; ++i) {
    CameraView v;
    v.id = "occ_" + std::to_string(i);
    v.intrinsics = k;
    v.translation = Vec3(0.1 * (i - 1), 0.05 * (i % 2), 0.0);
    v.image = render(o.scene, v, Vec3::Zero()).image;
    o.views.push_back(v);
  }
  return o;
}

PoseGrid pose_grid() {
  PoseGrid g;
  Rng rng(5);
  for (int cy = 0; cy < 10; cy += 2) {
    for (int cx = 0; cx < 10; cx += 2) {
      const int ox = (cy / 2) % 2;  // shift odd rows so the pattern is not a plain lattice
      for (int k = 0; k < 7; ++k) {
        const double x = 0.2 * (cx + ox) + rng.uniform(0.02, 0.18);
        const double y = 0.2 * cy + rng.uniform(0.02, 0.18);
        g.positions.emplace_back(x, y, 1.5);
      }
    }
  }
  return g;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'", 0);
  out << text;
}

}  // namespace

void write_all(const fs::path& root) {
  const Dataset quad = quad_dataset();
  save_dataset(quad, root / "quad");
  save_scene(quad_ground_truth(), root / "quad" / "scene.ply");
  write_text(root / "quad" / "config.json", config_to_json(quad_config()).dump(2) + "\n");
  {
    const RenderOutput golden = render(quad_ground_truth(), quad.primary[0], Vec3::Zero());
    save_png(golden.image, root / "quad" / "golden_train_0.png");
  }

  const PollutedDataset polluted = polluted_dataset();
  save_dataset(polluted.data, root / "polluted");
  nlohmann::json inj = nlohmann::json::array();
  for (const auto& v : polluted.injected) {
    nlohmann::json gain = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) gain.push_back({v.transform.gain(r, 0), v.transform.gain(r, 1), v.transform.gain(r, 2)});
    inj.push_back({{"view", v.id},
                   {"gain", gain},
                   {"bias", {v.transform.bias[0], v.transform.bias[1], v.transform.bias[2]}},
                   {"score", availability_score(v.transform)}});
  }
  write_text(root / "polluted" / "injected.json", inj.dump(2) + "\n");
  write_text(root / "polluted" / "config.json", config_to_json(quad_config()).dump(2) + "\n");

  const OcclusionScene occ = occlusion_scene();
  fs::create_directories(root / "occlusion" / "images");
  save_scene(occ.scene, root / "occlusion" / "scene.ply");
  save_poses(occ.views, root / "occlusion" / "poses.txt");
  for (const auto& v : occ.views) save_png(v.image, root / "occlusion" / "images" / (v.id + ".png"));
  nlohmann::json hidden = occ.hidden;
  write_text(root / "occlusion" / "hidden.json", hidden.dump() + "\n");

  const PoseGrid grid = pose_grid();
  fs::create_directories(root / "pose_grid");
  std::string traj = "# x y z\n";
  char buf[96];
  for (const auto& p : grid.positions) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
    traj += buf;
  }
  write_text(root / "pose_grid" / "trajectory.txt", traj);
  std::snprintf(buf, sizeof buf, "%g,%g,%g,%g\n", grid.envelope_min.x(), grid.envelope_min.y(), grid.envelope_max.x(),
                grid.envelope_max.y());
  write_text(root / "pose_grid" / "envelope.txt", buf);
}

}  // namespace bsplat::fixtures
