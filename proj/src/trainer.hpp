#pragma once

#include "budget.hpp"
#include "config.hpp"
#include "fusion.hpp"
#include "ply.hpp"

#include <functional>

namespace bsplat {

struct MetricRow {
  std::int64_t iteration = 0;
  std::int64_t event = 0;  // event index when the row follows an event, else 0
  std::string view_id;
  double loss = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  std::int64_t primitives = 0;
};

std::string metrics_csv(const std::vector<MetricRow>& rows);

struct TrainHooks {
  std::function<void(const EventRecord&, const Scene&)> on_event;
  std::function<void(const MetricRow&)> on_log;
};

struct TrainResult {
  Scene scene;
  std::vector<MetricRow> metrics;
  BudgetLedger ledger;
};

// Seeded initial scene: from `cloud` when given (3-NN scales, init opacity),
// otherwise init.count primitives uniform in the init bounds.
Scene initialize_scene(const PointCloud* cloud, const InitConfig& init, const Partition& partition, Rng& rng);

// Runs config.total_iters optimizer steps over `views` (seeded round-robin)
// with prune-then-densify events on the schedule. `corrections` is empty or
// one transform per view, applied to the render inside the loss.
TrainResult train(const Scene& scene0, const std::vector<CameraView>& views,
                  const std::vector<RadiometricTransform>& corrections, const TrainConfig& config,
                  const TrainHooks& hooks = {});

struct ViewMetrics {
  std::string view_id;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct Evaluation {
  std::vector<ViewMetrics> views;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

Evaluation evaluate(const Scene& scene, const std::vector<CameraView>& views, const Vec3& background,
                    const RenderSettings& settings = {});

}  // namespace bsplat
