#pragma once

#include "common.hpp"

namespace bsplat {

inline constexpr double kPsnrCap = 99.0;

struct LossValue {
  double value = 0.0;
  Image grad;  // d(value)/d(rendered)
};

double mse(const Image& a, const Image& b);

// 10 log10(1 / MSE) for images in [0,1]; identical images give kPsnrCap.
double psnr(const Image& a, const Image& b);

// Mean SSIM over pixels and channels: 11x11 Gaussian window (sigma 1.5),
// zero padding, C1 = 0.01^2, C2 = 0.03^2.
double ssim(const Image& a, const Image& b);

// SSIM of `rendered` against `target` with its gradient w.r.t. `rendered`.
LossValue ssim_with_grad(const Image& rendered, const Image& target);

LossValue l1_loss(const Image& rendered, const Image& target);

// (1 - lambda) * L1 + lambda * (1 - SSIM)
LossValue photometric_loss(const Image& rendered, const Image& target, double lambda_ssim);

}  // namespace bsplat
