#pragma once

#include "budget.hpp"
#include "render.hpp"

#include <array>

namespace bsplat {

enum class OpacityAttenuation {
  Multiplicative,  // child alpha = factor * parent alpha
  Absolute,        // child alpha = factor
};

struct SuiteConfig {
  double opacity_prune_threshold = 0.05;
  double pad_perturb_factor = 0.3;  // std-dev of the offset, in units of s_q
  double pad_scale_attenuation = 1.0 / 1.6;
  double pad_opacity_attenuation = 0.3;
  OpacityAttenuation opacity_mode = OpacityAttenuation::Multiplicative;
  std::uint64_t rng_seed = 0;

  void validate() const;  // ConfigError on out-of-range values
};

// Sum of per-pixel gradient magnitudes over the total footprint; 0 if unobserved.
double area_normalized_gradient(const AccumulatedStats& stats);

// Running max of the footprint-averaged effective opacity for one view.
void max_effective_opacity_update(AccumulatedStats& stats, double view_sum_alpha_hat, std::int64_t view_footprint);

// Folds one view's render and backward statistics into every primitive.
void accumulate_view(Scene& scene, const RenderOutput& forward, const GradientBuffer& grads);

// True where max_effective_opacity < tau (unobserved primitives included).
std::vector<bool> opacity_prune_mask(const Scene& scene, double tau);

// Baseline: true where the raw opacity is below `min_opacity`.
std::vector<bool> vanilla_prune_mask(const Scene& scene, double min_opacity = 0.005);

std::vector<double> area_normalized_importance(const Scene& scene);

// Baseline importance: view-averaged norm of the signed projected-mean gradient.
std::vector<double> signed_gradient_importance(const Scene& scene);

// Triplet {x + R dl, x, x - R dl} with dl = delta * e_q.
std::array<GaussianPrimitive, 3> principal_axis_triplet(const GaussianPrimitive& parent, double delta,
                                                         const SuiteConfig& config);

// Draws delta ~ N(0, (factor * s_q)^2) and builds the triplet.
std::array<GaussianPrimitive, 3> principal_axis_densify(const GaussianPrimitive& parent, const SuiteConfig& config,
                                                         Rng& rng);

// Growth 2 gives the triplet; growth 1 keeps only the mirrored pair.
class PrincipalAxisDensifier : public Densifier {
 public:
  explicit PrincipalAxisDensifier(SuiteConfig config = {}) : config_(config) {}
  int max_growth() const override { return 2; }
  std::vector<GaussianPrimitive> densify(const GaussianPrimitive& parent, int growth, Rng& rng) const override;

 private:
  SuiteConfig config_;
};

// Baseline clone/split: large primitives are split into two samples drawn
// from the parent Gaussian with scale / 1.6; small ones are cloned.
class CloneSplitDensifier : public Densifier {
 public:
  explicit CloneSplitDensifier(double split_scale = 0.05) : split_scale_(split_scale) {}
  int max_growth() const override { return 1; }
  std::vector<GaussianPrimitive> densify(const GaussianPrimitive& parent, int growth, Rng& rng) const override;

 private:
  double split_scale_;
};

}  // namespace bsplat
