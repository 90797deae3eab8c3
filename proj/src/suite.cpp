#include "suite.hpp"

#include <cmath>

namespace bsplat {

void SuiteConfig::validate() const {
  auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!(opacity_prune_threshold >= 0.0 && opacity_prune_threshold < 1.0)) {
    throw ConfigError("opacity_prune_threshold must be in [0, 1)");
  }
  if (!(pad_perturb_factor >= 0.0) || !std::isfinite(pad_perturb_factor)) {
    throw ConfigError("pad_perturb_factor must be finite and >= 0");
  }
  if (!in_unit(pad_scale_attenuation)) throw ConfigError("pad_scale_attenuation must be in (0, 1]");
  if (!in_unit(pad_opacity_attenuation)) throw ConfigError("pad_opacity_attenuation must be in (0, 1]");
}

double area_normalized_gradient(const AccumulatedStats& stats) {
  if (stats.sum_footprint_pixels == 0) return 0.0;
  return stats.sum_abs_pixel_grad / static_cast<double>(stats.sum_footprint_pixels);
}

void max_effective_opacity_update(AccumulatedStats& stats, double view_sum_alpha_hat, std::int64_t view_footprint) {
  if (view_footprint <= 0) return;
  const double avg = view_sum_alpha_hat / static_cast<double>(view_footprint);
  stats.max_effective_opacity = std::max(stats.max_effective_opacity, avg);
}

void accumulate_view(Scene& scene, const RenderOutput& forward, const GradientBuffer& grads) {
  const std::size_t n = scene.primitives.size();
  if (forward.touches.size() != n || grads.size() != n) {
    throw InvalidArgument("render statistics do not match the scene size");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const TouchRecord& t = forward.touches[i];
    if (t.footprint_pixels == 0) continue;
    AccumulatedStats& s = scene.primitives[i].stats;
    s.sum_abs_pixel_grad += t.sum_abs_grad;
    s.sum_footprint_pixels += t.footprint_pixels;
    max_effective_opacity_update(s, t.sum_alpha_hat, t.footprint_pixels);
    s.observed = true;
    s.sum_signed_grad_norm += grads.mean2d[i].norm();
    ++s.visible_views;
  }
}

std::vector<bool> opacity_prune_mask(const Scene& scene, double tau) {
  std::vector<bool> mask(scene.primitives.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto& s = scene.primitives[i].stats;
    mask[i] = !s.observed || s.max_effective_opacity < tau;
  }
  return mask;
}

std::vector<bool> vanilla_prune_mask(const Scene& scene, double min_opacity) {
  std::vector<bool> mask(scene.primitives.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = scene.primitives[i].opacity() < min_opacity;
  return mask;
}

std::vector<double> area_normalized_importance(const Scene& scene) {
  std::vector<double> out(scene.primitives.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = area_normalized_gradient(scene.primitives[i].stats);
  return out;
}

std::vector<double> signed_gradient_importance(const Scene& scene) {
  std::vector<double> out(scene.primitives.size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& s = scene.primitives[i].stats;
    if (s.visible_views > 0) out[i] = s.sum_signed_grad_norm / static_cast<double>(s.visible_views);
  }
  return out;
}

namespace {

void check_finite(const GaussianPrimitive& parent) {
  if (!parent.finite()) throw InvalidArgument("cannot densify a primitive with non-finite parameters");
}

double child_opacity(double parent_alpha, const SuiteConfig& config) {
  if (config.opacity_mode == OpacityAttenuation::Absolute) return config.pad_opacity_attenuation;
  return config.pad_opacity_attenuation * parent_alpha;
}

}  // namespace

std::array<GaussianPrimitive, 3> principal_axis_triplet(const GaussianPrimitive& parent, double delta,
                                                         const SuiteConfig& config) {
  check_finite(parent);
  const int q = parent.principal_axis();
  const Vec3 offset = parent.rotation_matrix().col(q) * delta;

  GaussianPrimitive child = parent;
  child.stats.reset();
  child.log_scale = parent.log_scale.array() + std::log(config.pad_scale_attenuation);
  child.set_opacity(child_opacity(parent.opacity(), config));

  std::array<GaussianPrimitive, 3> out{child, child, child};
  out[0].mean = parent.mean + offset;
  out[2].mean = parent.mean - offset;
  return out;
}

std::array<GaussianPrimitive, 3> principal_axis_densify(const GaussianPrimitive& parent, const SuiteConfig& config,
                                                         Rng& rng) {
  check_finite(parent);
  const double s_q = parent.scale()[parent.principal_axis()];
  const double delta = rng.normal(0.0, config.pad_perturb_factor * s_q);
  return principal_axis_triplet(parent, delta, config);
}

std::vector<GaussianPrimitive> PrincipalAxisDensifier::densify(const GaussianPrimitive& parent, int growth,
                                                                Rng& rng) const {
  if (growth < 1 || growth > 2) throw InvalidArgument("principal-axis densification adds 1 or 2 primitives");
  const auto t = principal_axis_densify(parent, config_, rng);
  if (growth == 2) return {t[0], t[1], t[2]};
  return {t[0], t[2]};
}

std::vector<GaussianPrimitive> CloneSplitDensifier::densify(const GaussianPrimitive& parent, int growth,
                                                             Rng& rng) const {
  if (growth != 1) throw InvalidArgument("clone/split densification adds exactly 1 primitive");
  check_finite(parent);
  GaussianPrimitive child = parent;
  child.stats.reset();
  if (parent.scale().maxCoeff() <= split_scale_) return {child, child};

  const Mat3 r = parent.rotation_matrix();
  const Vec3 s = parent.scale();
  child.log_scale = parent.log_scale.array() - std::log(1.6);
  std::vector<GaussianPrimitive> out{child, child};
  for (auto& c : out) {
    const Vec3 z(rng.normal(), rng.normal(), rng.normal());
    c.mean = parent.mean + r * s.cwiseProduct(z);
  }
  return out;
}

}  // namespace bsplat
