#include <doctest.h>

#include "dataset.hpp"
#include "dataset_metrics.hpp"
#include "fixtures.hpp"
#include "image_io.hpp"
#include "ply.hpp"
#include "render.hpp"
#include "suite.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace bsplat;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("bsplat_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<Vec3> poses_in_cell(double x0, double y0, int n, double cell = 0.2) {
  std::vector<Vec3> out;
  for (int i = 0; i < n; ++i) out.emplace_back(x0 + cell * (0.1 + 0.8 * i / n), y0 + cell * 0.5, 1.5);
  return out;
}

}  // namespace

// ---- coverage / IDSM ----

TEST_CASE("25 of 100 cells occupied gives exactly 0.25") {
  const fixtures::PoseGrid g = fixtures::pose_grid();
  const CoverageGrid grid = coverage_grid(g.positions, Envelope::rectangle(g.envelope_min, g.envelope_max));
  CHECK(grid.total_cells == 100);
  CHECK(grid.occupied_cells == 25);
  CHECK(grid.coverage == 0.25);
  CHECK(grid.binned_poses == 175);
}

TEST_CASE("single-cell envelope separates 6 and 7 poses") {
  const Envelope one = Envelope::rectangle(Vec2(0, 0), Vec2(0.2, 0.2));
  CHECK(coverage(poses_in_cell(0, 0, 6), one) == 0.0);
  CHECK(coverage(poses_in_cell(0, 0, 7), one) == 1.0);
}

TEST_CASE("one pose never covers anything") {
  CHECK(coverage({Vec3(0.3, 0.3, 1)}) == 0.0);
  CHECK(coverage({Vec3(0.3, 0.3, 1)}, Envelope::rectangle(Vec2(0, 0), Vec2(1, 1))) == 0.0);
}

TEST_CASE("empty pose set gives 0 with a warning; degenerate envelope is an error") {
  const CoverageGrid g = coverage_grid({}, Envelope::rectangle(Vec2(0, 0), Vec2(1, 1)));
  CHECK(g.coverage == 0.0);
  CHECK_FALSE(g.warning.empty());
  CHECK_THROWS_AS(coverage_grid(poses_in_cell(0, 0, 7), Envelope::rectangle(Vec2(0, 0), Vec2(0, 1))), ConfigError);
  CHECK_THROWS_AS(coverage_grid(poses_in_cell(0, 0, 7), Envelope::from_polygon({Vec2(0, 0), Vec2(1, 1), Vec2(2, 2)})),
                  ConfigError);
}

TEST_CASE("boundary poses go to the cell of their floor coordinates") {
  const Envelope env = Envelope::rectangle(Vec2(0, 0), Vec2(0.4, 0.2));
  std::vector<Vec3> p(7, Vec3(0.2, 0.1, 1.0));  // on the shared edge
  const CoverageGrid g = coverage_grid(p, env);
  REQUIRE(g.nx == 2);
  CHECK(g.counts[0] == 0);
  CHECK(g.counts[1] == 7);
}

TEST_CASE("poses outside the envelope are ignored") {
  auto p = poses_in_cell(0, 0, 7);
  for (const auto& q : poses_in_cell(5, 5, 20)) p.push_back(q);
  const CoverageGrid g = coverage_grid(p, Envelope::rectangle(Vec2(0, 0), Vec2(0.4, 0.4)));
  CHECK(g.binned_poses == 7);
  CHECK(g.coverage == 0.25);
}

TEST_CASE("bounding-box envelope bins the maximum pose") {
  std::vector<Vec3> p;
  for (const auto& q : poses_in_cell(0, 0, 7)) p.push_back(q);
  p.emplace_back(1.0, 1.0, 1.0);
  const CoverageGrid g = coverage_grid(p);
  CHECK(g.binned_poses == static_cast<std::int64_t>(p.size()));
  CHECK(g.coverage > 0.0);
}

TEST_CASE("polygon envelope keeps cells whose centers are inside") {
  const Envelope tri = Envelope::from_polygon({Vec2(0, 0), Vec2(2, 0), Vec2(0, 2)});
  const CoverageGrid g = coverage_grid(poses_in_cell(0, 0, 7), tri);
  // centers (i+0.5, j+0.5)*0.2 with i + j + 1 < 10
  CHECK(g.total_cells == 45);
  CHECK(g.occupied_cells == 1);
}

TEST_CASE("coverage is monotone in added poses and stays in [0, 1]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Envelope env = Envelope::rectangle(Vec2(0, 0), Vec2(1, 1));
  std::vector<Vec3> p;
  double last = 0.0;
  for (int i = 0; i < 600; ++i) {
    p.emplace_back(u(rng), u(rng), 1.0);
    const double c = coverage(p, env);
    CHECK(c >= last);
    CHECK(c <= 1.0);
    last = c;
  }
  CHECK(last > 0.0);
}

TEST_CASE("coverage is invariant to translating poses and envelope together") {
  const fixtures::PoseGrid g = fixtures::pose_grid();
  const Vec2 shifts[] = {Vec2(3.0, -7.0), Vec2(-0.4, 0.6), Vec2(100.0, 200.0)};
  for (const Vec2& d : shifts) {
    std::vector<Vec3> moved;
    for (const auto& q : g.positions) moved.emplace_back(q.x() + d.x(), q.y() + d.y(), q.z() + 4.0);
    CHECK(coverage(moved, Envelope::rectangle(g.envelope_min + d, g.envelope_max + d)) == 0.25);
  }
}

TEST_CASE("IDSM is the literal ratio") {
  CHECK(idsm(30000, 100.0) == doctest::Approx(300.0).epsilon(1e-15));
  CHECK(idsm(2 * 30000, 100.0) == doctest::Approx(2 * idsm(30000, 100.0)));
  CHECK(idsm(30000, 200.0) == doctest::Approx(idsm(30000, 100.0) / 2));
  CHECK_THROWS_AS(idsm(10, 0.0), InvalidArgument);
  const fixtures::PoseGrid g = fixtures::pose_grid();
  CHECK(envelope_area(coverage_grid(g.positions, Envelope::rectangle(g.envelope_min, g.envelope_max))) ==
        doctest::Approx(4.0));
}

TEST_CASE("trajectory formats") {
  const auto xyz = parse_trajectory("# x y z\n1 2 3\n4 5 6\n");
  REQUIRE(xyz.size() == 2);
  CHECK(xyz[1] == Vec3(4, 5, 6));
  const auto tum = parse_trajectory("0.5 1 2 3 0 0 0 1\n");
  REQUIRE(tum.size() == 1);
  CHECK(tum[0] == Vec3(1, 2, 3));
  // world-to-camera pose: identity rotation, t = -c
  const auto pose = parse_trajectory("cam -1 -2 -3 0 0 0 1 10 10 5 5 10 10\n");
  REQUIRE(pose.size() == 1);
  CHECK((pose[0] - Vec3(1, 2, 3)).norm() < 1e-12);
  CHECK_THROWS_AS(parse_trajectory("1 2\n"), DataError);
  CHECK_THROWS_AS(parse_trajectory("1 2 x\n"), DataError);
}

TEST_CASE("histogram CSV lists every envelope cell") {
  const fixtures::PoseGrid g = fixtures::pose_grid();
  const std::string csv =
      histogram_csv(coverage_grid(g.positions, Envelope::rectangle(g.envelope_min, g.envelope_max)));
  CHECK(csv.rfind("ix,iy,x_min,y_min,count,occupied\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 101);
}

// ---- dataset I/O ----

TEST_CASE("pose file round trip is exact") {
  std::vector<CameraView> views = {fixtures::quad_camera("a", Vec3(0.3, -0.2, 2.1)),
                                   fixtures::quad_camera("b", Vec3(-0.7, 0.4, 1.9), 48)};
  const auto back = parse_poses(format_poses(views), "mem");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].id == views[i].id);
    CHECK((back[i].translation - views[i].translation).norm() == 0.0);
    CHECK((back[i].rotation - views[i].rotation).norm() < 1e-15);
    CHECK(back[i].intrinsics.fx == views[i].intrinsics.fx);
    CHECK(back[i].intrinsics.width == views[i].intrinsics.width);
  }
}

TEST_CASE("pose file errors") {
  CHECK_THROWS_AS(parse_poses("a 0 0 0 1 0 0 0 10 10 5 5 10\n", "p"), DataError);
  CHECK_THROWS_AS(parse_poses("a 0 0 0 1 0 0 0 10 10 5 5 10 10\na 0 0 0 1 0 0 0 10 10 5 5 10 10\n", "p"), DataError);
  CHECK(parse_poses("# only a comment\n\n", "p").empty());
  CHECK_THROWS_AS(load_poses("/nonexistent/poses.txt"), DataError);
}

TEST_CASE("budget override parsing") {
  const auto b = parse_budget_spec("region=1:1200,0:800");
  REQUIRE(b.size() == 2);
  CHECK(b[0] == std::pair<int, std::int64_t>(1, 1200));
  CHECK(b[1] == std::pair<int, std::int64_t>(0, 800));
  CHECK_THROWS_AS(parse_budget_spec("1:"), ConfigError);
  CHECK_THROWS_AS(parse_budget_spec("x:3"), ConfigError);
  CHECK_THROWS_AS(parse_budget_spec("1:-4"), ConfigError);
  Partition p = *fixtures::quad_dataset().partition;
  apply_budget_override(p, "1:50,0:70");
  CHECK(p.target(1) == 50);
  CHECK(p.target(0) == 70);
  CHECK_THROWS_AS(apply_budget_override(p, "9:5"), ConfigError);
}

TEST_CASE("partition JSON round trip and unknown keys") {
  const Partition p = *fixtures::quad_dataset().partition;
  const Partition q = partition_from_json(partition_to_json(p));
  CHECK(q.background_budget == p.background_budget);
  REQUIRE(q.polygons.size() == p.polygons.size());
  CHECK(q.polygons[0].vertices == p.polygons[0].vertices);
  auto doc = partition_to_json(p);
  doc["extra"] = 1;
  CHECK_THROWS_AS(partition_from_json(doc), ConfigError);
}

TEST_CASE("dataset directory round trip") {
  const fs::path dir = scratch("dataset");
  const Dataset d = fixtures::quad_dataset();
  save_dataset(d, dir);
  const Dataset e = load_dataset(dir);
  REQUIRE(e.primary.size() == d.primary.size());
  REQUIRE(e.heldout.size() == d.heldout.size());
  CHECK(e.aux.empty());
  REQUIRE(e.points);
  CHECK(e.points->positions.size() == d.points->positions.size());
  for (std::size_t i = 0; i < d.primary.size(); ++i) CHECK(e.primary[i].image.data == d.primary[i].image.data);
  fs::remove(dir / "poses.txt");
  CHECK_THROWS_AS(load_dataset(dir), DataError);
  fs::remove_all(dir);
}

TEST_CASE("image shape mismatch is a data error") {
  const fs::path dir = scratch("shape");
  std::vector<CameraView> v = {fixtures::quad_camera("a", Vec3(0, 0, 2), 32)};
  save_png(Image(16, 16, 3), dir / "a.png");
  CHECK_THROWS_AS(attach_images(v, dir), DataError);
  fs::remove_all(dir);
}

// ---- fixtures ----

TEST_CASE("polluted fixture injects exactly three views") {
  const fixtures::PollutedDataset p = fixtures::polluted_dataset();
  CHECK(p.data.aux.size() == 6);
  REQUIRE(p.injected.size() == 3);
  for (const auto& inj : p.injected) CHECK(availability_score(inj.transform) > 0.15);
  for (const auto& v : p.data.aux) CHECK(v.source != kPrimarySensor);
}

TEST_CASE("occlusion fixture: removing zero effective opacity leaves renders bitwise unchanged") {
  fixtures::OcclusionScene oc = fixtures::occlusion_scene();
  const Vec3 bg = Vec3::Zero();
  for (auto& g : oc.scene.primitives) g.stats.reset();
  std::vector<Image> before;
  for (const auto& v : oc.views) {
    const RenderOutput out = render(oc.scene, v, bg);
    before.push_back(out.image);
    for (std::size_t i = 0; i < oc.scene.size(); ++i) {
      const auto& t = out.touches[i];
      if (t.footprint_pixels == 0) continue;
      oc.scene.primitives[i].stats.observed = true;
      max_effective_opacity_update(oc.scene.primitives[i].stats, t.sum_alpha_hat, t.footprint_pixels);
    }
  }
  const auto mask = opacity_prune_mask(oc.scene, std::numeric_limits<double>::denorm_min());
  std::vector<std::size_t> pruned;
  Scene kept;
  kept.partition = oc.scene.partition;
  for (std::size_t i = 0; i < oc.scene.size(); ++i) {
    if (mask[i]) {
      pruned.push_back(i);
    } else {
      kept.primitives.push_back(oc.scene.primitives[i]);
      kept.assignment.push_back(oc.scene.assignment[i]);
    }
  }
  CHECK(pruned == oc.hidden);
  CHECK(static_cast<double>(pruned.size()) / oc.scene.size() == doctest::Approx(0.3));
  for (std::size_t v = 0; v < oc.views.size(); ++v) CHECK(render(kept, oc.views[v], bg).image.data == before[v].data);
}

TEST_CASE("fixture writer produces the bundled layout") {
  const fs::path dir = scratch("fixtures");
  fixtures::write_all(dir);
  for (const char* f : {"quad/poses.txt", "quad/config.json", "quad/scene.ply", "quad/golden_train_0.png",
                        "quad/partition.json", "polluted/aux_poses.txt", "polluted/injected.json",
                        "occlusion/scene.ply", "occlusion/hidden.json", "pose_grid/trajectory.txt"}) {
    CHECK_MESSAGE(fs::exists(dir / f), f);
  }
  CHECK(load_dataset(dir / "quad").primary.size() == 3);
  CHECK(coverage(load_trajectory(dir / "pose_grid/trajectory.txt"), Envelope::rectangle(Vec2(0, 0), Vec2(2, 2))) ==
        0.25);
  fs::remove_all(dir);
}
