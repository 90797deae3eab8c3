#include "trainer.hpp"

#include "losses.hpp"
#include "optimizer.hpp"
#include "suite.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>
#include <numeric>
#include <sstream>

namespace bsplat {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Mean squared distance to the 3 nearest other points; brute force.
std::vector<double> nearest_sq_distance(const std::vector<Vec3>& points) {
  std::vector<double> out(points.size(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best[3] = {INFINITY, INFINITY, INFINITY};
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (i == j) continue;
      const double d = (points[i] - points[j]).squaredNorm();
      if (d < best[2]) {
        best[2] = d;
        std::sort(best, best + 3);
      }
    }
    double sum = 0.0;
    int n = 0;
    for (double b : best) {
      if (std::isfinite(b)) {
        sum += b;
        ++n;
      }
    }
    out[i] = n > 0 ? sum / n : 0.01;
  }
  return out;
}

void clamp_color(GaussianPrimitive& g) {
  const Vec3 rgb = g.rgb().cwiseMax(0.0).cwiseMin(1.0);
  if (rgb != g.rgb()) g.set_rgb(rgb);
}

bool all_finite(const GradientBuffer& g) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.mean[i].allFinite() || !g.log_scale[i].allFinite() || !g.rotation[i].allFinite() ||
        !std::isfinite(g.opacity_logit[i]) || !g.color_dc[i].allFinite()) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "iteration,event,view,loss,psnr,ssim,primitives\n";
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.event << ',' << r.view_id << ',' << format_double(r.loss) << ','
        << format_double(r.psnr) << ',' << format_double(r.ssim) << ',' << r.primitives << '\n';
  }
  return out.str();
}

Scene initialize_scene(const PointCloud* cloud, const InitConfig& init, const Partition& partition, Rng& rng) {
  Scene s;
  s.partition = partition;
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;
  if (cloud && !cloud->positions.empty()) {
    positions = cloud->positions;
    colors = cloud->colors;
    colors.resize(positions.size(), Vec3::Constant(0.5));
  } else {
    for (std::int64_t i = 0; i < init.count; ++i) {
      Vec3 p;
      for (int d = 0; d < 3; ++d) p[d] = rng.uniform(init.bounds_min[d], init.bounds_max[d]);
      positions.push_back(p);
      colors.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
    }
  }
  const std::vector<double> d2 = nearest_sq_distance(positions);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    GaussianPrimitive g;
    g.mean = positions[i];
    g.log_scale = Vec3::Constant(std::log(std::max(std::sqrt(d2[i]), 1e-7)));
    g.set_opacity(init.opacity);
    g.set_rgb(colors[i].cwiseMax(0.0).cwiseMin(1.0));
    if (!g.finite()) throw DataError("seed point " + std::to_string(i) + " is not finite");
    s.primitives.push_back(g);
  }
  assign_to_polygons(s);
  return s;
}

TrainResult train(const Scene& scene0, const std::vector<CameraView>& views,
                  const std::vector<RadiometricTransform>& corrections, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.validate();
  TrainResult result;
  result.scene = scene0;
  if (config.total_iters == 0) return result;

  if (views.size() < 2) throw DataError("training needs at least 2 views");
  if (!corrections.empty() && corrections.size() != views.size()) {
    throw InvalidArgument("need one color correction per view");
  }
  for (const auto& v : views) {
    v.validate();
    if (v.image.empty()) throw DataError("view '" + v.id + "' has no image");
  }
  const auto n_views = static_cast<std::int64_t>(views.size());
  if (config.schedule.start_iter < n_views || config.schedule.interval < n_views) {
    throw ConfigError("schedule start_iter and interval must each cover a full pass over the " +
                      std::to_string(n_views) + " training views");
  }

  Scene& scene = result.scene;
  assign_to_polygons(scene);
  const RenderSettings rs{config.workers};
  BudgetController controller(config.schedule);
  Rng rng(config.seed ^ (config.suite.rng_seed * 0x9E3779B97F4A7C15ULL));

  // Seeded round-robin: one permutation, cycled.
  std::vector<std::size_t> order(views.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  std::unique_ptr<Densifier> densifier;
  if (config.toggles.principal_axis_densify) {
    densifier = std::make_unique<PrincipalAxisDensifier>(config.suite);
  } else {
    densifier = std::make_unique<CloneSplitDensifier>(config.baseline.split_scale);
  }

  AdamOptimizer adam(config.lr);
  adam.resize(scene.size());
  std::vector<std::ptrdiff_t> source;
  const std::int64_t last_event_iter = config.schedule.iteration_of(controller.total_events());

  for (std::int64_t it = 1; it <= config.total_iters; ++it) {
    const std::size_t vi = order[static_cast<std::size_t>((it - 1) % n_views)];
    const CameraView& view = views[vi];
    const bool corrected = !corrections.empty() && !corrections[vi].identity();

    RenderOutput fwd = render(scene, view, config.background, rs);
    const Image shown = corrected ? corrections[vi].apply(fwd.image) : fwd.image;
    LossValue loss = photometric_loss(shown, view.image, config.lambda_ssim);
    if (!std::isfinite(loss.value)) throw DivergenceError("non-finite loss", it);
    loss.value *= view.weight;
    for (double& g : loss.grad.data) g *= view.weight;
    const Image pixel_grad = corrected ? corrections[vi].pull_back(loss.grad) : loss.grad;

    const GradientBuffer grads = backward(scene, view, fwd, pixel_grad, rs);
    if (!all_finite(grads)) throw DivergenceError("non-finite gradient", it);
    accumulate_view(scene, fwd, grads);

    const bool locked = config.lock_regions_after_last_event && it > last_event_iter;
    std::vector<Vec2> before_xy;
    if (locked) {
      before_xy.reserve(scene.size());
      for (const auto& g : scene.primitives) before_xy.push_back(g.mean.head<2>());
    }
    adam.step(scene.primitives, grads, it, config.total_iters);
    for (std::size_t i = 0; i < scene.size(); ++i) {
      GaussianPrimitive& g = scene.primitives[i];
      clamp_color(g);
      if (locked && scene.partition.region_of(g.mean.head<2>()) != scene.assignment[i]) {
        g.mean.head<2>() = before_xy[i];
      }
      if (!g.finite()) throw DivergenceError("primitive " + std::to_string(i) + " became non-finite", it);
    }

    const std::int64_t k = config.schedule.event_at(it);
    if (it % config.log_interval == 0 || it == config.total_iters || k > 0) {
      MetricRow row;
      row.iteration = it;
      row.view_id = view.id;
      row.loss = loss.value;
      row.psnr = psnr(shown, view.image);
      row.ssim = ssim(shown, view.image);
      row.primitives = static_cast<std::int64_t>(scene.size());
      result.metrics.push_back(row);
      if (hooks.on_log) hooks.on_log(row);
    }

    if (k > 0) {
      const std::vector<bool> mask = config.toggles.effective_opacity_prune
                                         ? opacity_prune_mask(scene, config.suite.opacity_prune_threshold)
                                         : vanilla_prune_mask(scene, config.baseline.min_opacity);
      const std::vector<double> importance = config.toggles.area_normalized_gradient
                                                 ? area_normalized_importance(scene)
                                                 : signed_gradient_importance(scene);
      const EventRecord& rec = controller.run_event(scene, k, mask, importance, *densifier, rng, it, &source);
      adam.remap(source);
      MetricRow row = result.metrics.back();
      row.event = k;
      row.primitives = static_cast<std::int64_t>(scene.size());
      result.metrics.push_back(row);
      if (hooks.on_log) hooks.on_log(row);
      if (hooks.on_event) hooks.on_event(rec, scene);
    }
  }
  result.ledger = controller.ledger();
  return result;
}

Evaluation evaluate(const Scene& scene, const std::vector<CameraView>& views, const Vec3& background,
                    const RenderSettings& settings) {
  if (views.empty()) throw DataError("no views to evaluate");
  Evaluation e;
  for (const auto& v : views) {
    if (v.image.empty()) throw DataError("view '" + v.id + "' has no image");
    const RenderOutput out = render(scene, v, background, settings);
    ViewMetrics m{v.id, psnr(out.image, v.image), ssim(out.image, v.image)};
    e.mean_psnr += m.psnr;
    e.mean_ssim += m.ssim;
    e.views.push_back(m);
  }
  e.mean_psnr /= static_cast<double>(views.size());
  e.mean_ssim /= static_cast<double>(views.size());
  return e;
}

}  // namespace bsplat
