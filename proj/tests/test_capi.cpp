// Exercises the shared library through its C header only.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bsplat/bsplat.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = BSPLAT_FIXTURES_DIR;

std::string take(char* s) {
  std::string out = s ? s : "";
  bsplat_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strlen(bsplat_version()) > 0);
  CHECK(std::string(bsplat_status_name(BSPLAT_OK)) == "ok");
  CHECK(std::string(bsplat_status_name(BSPLAT_ERR_DATA)) == "data error");
  CHECK(std::string(bsplat_status_name(BSPLAT_ERR_CONFIG)) == "config error");
}

TEST_CASE("config round trip and setters") {
  bsplat_config* c = nullptr;
  REQUIRE(bsplat_config_default(&c) == BSPLAT_OK);
  double tau = 0.0;
  CHECK(bsplat_config_get_tau(c, &tau) == BSPLAT_OK);
  CHECK(tau == 0.15);
  CHECK(bsplat_config_set_seed(c, 42) == BSPLAT_OK);
  CHECK(bsplat_config_set_tau(c, 0.3) == BSPLAT_OK);
  CHECK(bsplat_config_set_tau(c, -1.0) == BSPLAT_ERR_CONFIG);
  CHECK(std::strlen(bsplat_last_error()) > 0);
  CHECK(bsplat_config_set_workers(c, 0) != BSPLAT_OK);
  CHECK(bsplat_config_set_budget(c, "region=1:10,0:5") == BSPLAT_OK);
  CHECK(bsplat_config_set_budget(c, "1:x") == BSPLAT_ERR_CONFIG);

  char* json = nullptr;
  REQUIRE(bsplat_config_to_json(c, &json) == BSPLAT_OK);
  const std::string text = take(json);
  bsplat_config* d = nullptr;
  REQUIRE(bsplat_config_parse(text.c_str(), &d) == BSPLAT_OK);
  char* json2 = nullptr;
  REQUIRE(bsplat_config_to_json(d, &json2) == BSPLAT_OK);
  CHECK(take(json2) == text);
  CHECK(bsplat_config_get_tau(d, &tau) == BSPLAT_OK);
  CHECK(tau == 0.3);
  bsplat_config_free(c);
  bsplat_config_free(d);
}

TEST_CASE("config errors") {
  bsplat_config* c = nullptr;
  CHECK(bsplat_config_parse("{\"nope\": 1}", &c) == BSPLAT_ERR_CONFIG);
  CHECK(c == nullptr);
  CHECK(std::string(bsplat_last_error()).find("nope") != std::string::npos);
  CHECK(bsplat_config_parse("{", &c) == BSPLAT_ERR_CONFIG);
  CHECK(bsplat_config_load("/nonexistent/c.json", &c) != BSPLAT_OK);
  CHECK(bsplat_config_default(nullptr) == BSPLAT_ERR_INVALID_ARGUMENT);
  bsplat_config_free(nullptr);
}

TEST_CASE("dataset loading") {
  bsplat_dataset* d = nullptr;
  REQUIRE(bsplat_dataset_load((kFixtures / "polluted").c_str(), &d) == BSPLAT_OK);
  size_t p = 0, a = 0, h = 0;
  CHECK(bsplat_dataset_view_counts(d, &p, &a, &h) == BSPLAT_OK);
  CHECK(p == 3);
  CHECK(a == 6);
  CHECK(h == 3);
  bsplat_dataset_free(d);

  bsplat_dataset* missing = nullptr;
  CHECK(bsplat_dataset_load("/nonexistent/dataset", &missing) == BSPLAT_ERR_DATA);
  CHECK(missing == nullptr);
}

TEST_CASE("scene counts and regions") {
  bsplat_scene* s = nullptr;
  REQUIRE(bsplat_scene_load((kFixtures / "quad/scene.ply").c_str(), &s) == BSPLAT_OK);
  size_t n = 0, roi = 0, bg = 0;
  CHECK(bsplat_scene_count(s, &n) == BSPLAT_OK);
  CHECK(n == 1600);
  const std::string part = (kFixtures / "quad/partition.json").string();
  CHECK(bsplat_scene_region_count(s, part.c_str(), 1, &roi) == BSPLAT_OK);
  CHECK(bsplat_scene_region_count(s, part.c_str(), 0, &bg) == BSPLAT_OK);
  CHECK(roi + bg == n);
  CHECK(roi == 800);
  CHECK(bsplat_scene_region_count(s, part.c_str(), 7, &roi) != BSPLAT_OK);

  const fs::path tmp = fs::temp_directory_path() / "bsplat_capi_scene.ply";
  CHECK(bsplat_scene_save(s, tmp.c_str()) == BSPLAT_OK);
  bsplat_scene* t = nullptr;
  REQUIRE(bsplat_scene_load(tmp.c_str(), &t) == BSPLAT_OK);
  CHECK(bsplat_scene_count(t, &n) == BSPLAT_OK);
  CHECK(n == 1600);
  bsplat_scene_free(s);
  bsplat_scene_free(t);
  fs::remove(tmp);
  CHECK(bsplat_scene_load("/nonexistent.ply", &s) != BSPLAT_OK);
}

TEST_CASE("plan text") {
  bsplat_config* c = nullptr;
  bsplat_dataset* d = nullptr;
  REQUIRE(bsplat_config_load((kFixtures / "quad/config.json").c_str(), &c) == BSPLAT_OK);
  REQUIRE(bsplat_dataset_load((kFixtures / "quad").c_str(), &d) == BSPLAT_OK);
  char* plan = nullptr;
  REQUIRE(bsplat_plan(c, d, &plan) == BSPLAT_OK);
  const std::string text = take(plan);
  CHECK(text.rfind("events K=5", 0) == 0);
  CHECK(text.find("5,500,1,1200,") != std::string::npos);
  CHECK(text.find("5,500,0,800,") != std::string::npos);
  bsplat_config_free(c);
  bsplat_dataset_free(d);
}

TEST_CASE("metrics on the pose grid") {
  const double env[4] = {0.0, 0.0, 2.0, 2.0};
  double cov = -1.0, density = -1.0;
  const std::string traj = (kFixtures / "pose_grid/trajectory.txt").string();
  REQUIRE(bsplat_metrics(traj.c_str(), env, 0.2, 6, -1, nullptr, &cov, &density) == BSPLAT_OK);
  CHECK(cov == 0.25);
  CHECK(density == 175.0 / 4.0);
  const double flat[4] = {0.0, 0.0, 2.0, 0.0};
  CHECK(bsplat_metrics(traj.c_str(), flat, 0.2, 6, -1, nullptr, &cov, &density) == BSPLAT_ERR_CONFIG);
  CHECK(bsplat_metrics("/nonexistent.txt", env, 0.2, 6, -1, nullptr, &cov, &density) == BSPLAT_ERR_DATA);
}

TEST_CASE("workflow argument errors") {
  CHECK(bsplat_train(nullptr, nullptr, "/tmp/x") == BSPLAT_ERR_INVALID_ARGUMENT);
  bsplat_config* c = nullptr;
  bsplat_dataset* d = nullptr;
  REQUIRE(bsplat_config_default(&c) == BSPLAT_OK);
  REQUIRE(bsplat_dataset_load((kFixtures / "polluted").c_str(), &d) == BSPLAT_OK);
  CHECK(bsplat_fuse(c, d, "/nonexistent/anchor.ply", "/tmp/bsplat_capi_fuse") == BSPLAT_ERR_DATA);
  CHECK(bsplat_ablate(c, d, "bogus", "/tmp/bsplat_capi_ablate.csv") == BSPLAT_ERR_CONFIG);
  bsplat_config_free(c);
  bsplat_dataset_free(d);
}
