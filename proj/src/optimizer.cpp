#include "optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace bsplat {

void LearningRates::validate() const {
  for (double r : {mean_init, mean_final, log_scale, rotation, opacity, color}) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("learning rates must be finite and >= 0");
  }
  if ((mean_init == 0.0) != (mean_final == 0.0)) throw ConfigError("mean learning rates must both be zero or both positive");
}

double LearningRates::mean_at(std::int64_t iteration, std::int64_t total_iters) const {
  if (mean_init == 0.0) return 0.0;
  if (total_iters <= 1) return mean_init;
  const double t = std::clamp(static_cast<double>(iteration - 1) / static_cast<double>(total_iters - 1), 0.0, 1.0);
  return std::exp((1.0 - t) * std::log(mean_init) + t * std::log(mean_final));
}

void AdamOptimizer::resize(std::size_t n) {
  m_.assign(n, Vector::Zero());
  v_.assign(n, Vector::Zero());
  steps_.assign(n, 0);
}

void AdamOptimizer::remap(const std::vector<std::ptrdiff_t>& source) {
  std::vector<Vector> m(source.size(), Vector::Zero()), v(source.size(), Vector::Zero());
  std::vector<std::int64_t> steps(source.size(), 0);
  for (std::size_t i = 0; i < source.size(); ++i) {
    const std::ptrdiff_t s = source[i];
    if (s < 0) continue;
    const auto si = static_cast<std::size_t>(s);
    if (si >= steps_.size()) throw InvalidArgument("optimizer remap index out of range");
    m[i] = m_[si];
    v[i] = v_[si];
    steps[i] = steps_[si];
  }
  m_ = std::move(m);
  v_ = std::move(v);
  steps_ = std::move(steps);
}

void AdamOptimizer::step(std::vector<GaussianPrimitive>& primitives, const GradientBuffer& grads,
                         std::int64_t iteration, std::int64_t total_iters) {
  if (primitives.size() != steps_.size() || grads.size() != steps_.size()) {
    throw InvalidArgument("optimizer state does not match the scene size");
  }
  Vector lr;
  lr.segment<3>(0).setConstant(rates_.mean_at(iteration, total_iters));
  lr.segment<3>(3).setConstant(rates_.log_scale);
  lr.segment<4>(6).setConstant(rates_.rotation);
  lr[10] = rates_.opacity;
  lr.segment<3>(11).setConstant(rates_.color);

  for (std::size_t i = 0; i < primitives.size(); ++i) {
    Vector g;
    g << grads.mean[i], grads.log_scale[i], grads.rotation[i], grads.opacity_logit[i], grads.color_dc[i];
    if (g.isZero(0.0)) continue;
    const std::int64_t t = ++steps_[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
    const Vector delta =
        lr.cwiseProduct((m_[i] / c1).cwiseQuotient(((v_[i] / c2).cwiseSqrt().array() + eps_).matrix()));

    GaussianPrimitive& p = primitives[i];
    p.mean -= delta.segment<3>(0);
    p.log_scale -= delta.segment<3>(3);
    p.rotation -= delta.segment<4>(6);
    p.opacity_logit -= delta[10];
    p.color_dc -= delta.segment<3>(11);
    p.normalize_rotation();
  }
}

}  // namespace bsplat
