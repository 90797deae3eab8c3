#pragma once

// Deterministic synthetic scenes used by the tests, the acceptance binary and
// `bsplat synth`.

#include "config.hpp"
#include "dataset.hpp"
#include "fusion.hpp"

#include <filesystem>

namespace bsplat::fixtures {

// Smooth color texture on the z = 0 plane, every channel in [0.15, 0.6].
Vec3 quad_texture(double x, double y);

// Ground truth: a 40x40 grid of flat splats textured over [-1, 1]^2.
Scene quad_ground_truth();

// Camera looking down at the quad from `eye`, 64x64.
CameraView quad_camera(const std::string& id, const Vec3& eye, int size = 64);

// 3 primary views, 3 held-out views, a 300-point seed cloud and the
// {ROI = left half: 1200, background: 800} partition.
Dataset quad_dataset();

// Training config tuned for the quad fixture (600 iterations, events at
// 100, 200, ..., 500).
TrainConfig quad_config();

struct InjectedView {
  std::string id;
  RadiometricTransform transform;
};

// Quad dataset plus 6 auxiliary views; three of them carry a radiometric
// injection whose score exceeds 0.15, the rest are clean.
struct PollutedDataset {
  Dataset data;
  std::vector<InjectedView> injected;
};
PollutedDataset polluted_dataset();

// Occluded-fraction fixture: 68 visible splats in front of a two-layer wall
// that drives transmittance to ~1e-4 over every pixel, and 30 splats planted
// behind it. Every hidden splat ends with max effective opacity 0.
struct OcclusionScene {
  Scene scene;
  std::vector<CameraView> views;
  std::vector<std::size_t> hidden;  // indices of the planted splats
};
OcclusionScene occlusion_scene();

// 10x10 cells of 0.2 m over [0, 2]^2 with 7 poses in each of 25 cells.
struct PoseGrid {
  std::vector<Vec3> positions;
  Vec2 envelope_min{0.0, 0.0};
  Vec2 envelope_max{2.0, 2.0};
};
PoseGrid pose_grid();

// Writes quad/, polluted/, occlusion/ and pose_grid/ under `root`.
void write_all(const std::filesystem::path& root);

}  // namespace bsplat::fixtures
