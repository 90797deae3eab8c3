#pragma once

#include "render.hpp"

#include <vector>

namespace bsplat {

struct LearningRates {
  double mean_init = 2e-3;
  double mean_final = 2e-5;  // reached at the last iteration, exponential decay
  double log_scale = 5e-3;
  double rotation = 1e-3;
  double opacity = 2.5e-2;
  double color = 1e-2;

  void validate() const;
  // Exponential interpolation between mean_init and mean_final.
  double mean_at(std::int64_t iteration, std::int64_t total_iters) const;
};

// Adam with per-parameter-class rates and per-primitive step counts, so new
// primitives start from fresh moments.
class AdamOptimizer {
 public:
  static constexpr int kParams = 14;  // mean 3, log_scale 3, rotation 4, opacity 1, color 3
  using Vector = Eigen::Matrix<double, kParams, 1>;

  explicit AdamOptimizer(LearningRates rates = {}, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-15)
      : rates_(rates), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void resize(std::size_t n);
  std::size_t size() const { return steps_.size(); }

  // Keeps the moments of survivors; source[i] < 0 starts primitive i fresh.
  void remap(const std::vector<std::ptrdiff_t>& source);

  // One update of every primitive that has a non-zero gradient. Quaternions
  // are renormalized afterwards.
  void step(std::vector<GaussianPrimitive>& primitives, const GradientBuffer& grads, std::int64_t iteration,
            std::int64_t total_iters);

 private:
  LearningRates rates_;
  double beta1_, beta2_, eps_;
  std::vector<Vector> m_, v_;
  std::vector<std::int64_t> steps_;
};

}  // namespace bsplat
