#pragma once

#include "budget.hpp"
#include "optimizer.hpp"
#include "suite.hpp"

#include <json.hpp>

#include <filesystem>

namespace bsplat {

// Which parts of the suite replace their baseline counterparts.
struct ToggleSet {
  bool area_normalized_gradient = true;  // off: signed view-averaged gradient
  bool effective_opacity_prune = true;   // off: raw opacity threshold
  bool principal_axis_densify = true;    // off: clone/split
};

struct BaselineConfig {
  double min_opacity = 0.005;
  double split_scale = 0.05;
};

struct InitConfig {
  std::int64_t count = 500;  // random init only
  double opacity = 0.1;
  Vec3 bounds_min = Vec3::Constant(-1.0);
  Vec3 bounds_max = Vec3::Constant(1.0);
};

struct FusionConfig {
  double tau = 0.15;
  int downsample = 2;
  std::int64_t min_valid_pixels = 100;
  double valid_transmittance = 0.5;
};

struct TrainConfig {
  std::int64_t total_iters = 30000;
  DensificationSchedule schedule;
  LearningRates lr;
  double lambda_ssim = 0.2;
  SuiteConfig suite;
  ToggleSet toggles;
  BaselineConfig baseline;
  FusionConfig fusion;
  InitConfig init;
  std::uint64_t seed = 0;
  Vec3 background = Vec3::Zero();
  int workers = 1;
  int sh_degree = 0;  // reserved; only 0 is supported
  std::int64_t log_interval = 100;
  std::int64_t checkpoint_every = 0;  // in events; 0 disables
  bool lock_regions_after_last_event = true;
  // Region budget overrides, `id:count,...`, applied over the partition file.
  std::string budget;

  // ConfigError on inconsistent values. A zero-iteration config skips the
  // schedule checks.
  void validate() const;
};

TrainConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const TrainConfig& config);
TrainConfig load_config(const std::filesystem::path& path);

}  // namespace bsplat
