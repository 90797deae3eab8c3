#include "losses.hpp"

#include <array>
#include <cmath>

namespace bsplat {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, kWindow>& gaussian_kernel() {
  static const std::array<double, kWindow> kernel = [] {
    std::array<double, kWindow> k{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - kWindow / 2;
      k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
      sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
  }();
  return kernel;
}

// Single-channel plane.
struct Plane {
  int w = 0, h = 0;
  std::vector<double> v;
  Plane(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_, 0.0) {}
  double& operator()(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
  double operator()(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

Plane channel(const Image& img, int c) {
  Plane p(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) p(x, y) = img.at(x, y, c);
  }
  return p;
}

// Separable Gaussian blur, zero padded, same size. Self-adjoint.
Plane blur(const Plane& in) {
  const auto& k = gaussian_kernel();
  const int r = kWindow / 2;
  Plane tmp(in.w, in.h);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < in.w) s += k[i + r] * in(xx, y);
      }
      tmp(x, y) = s;
    }
  }
  Plane out(in.w, in.h);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < in.h) s += k[i + r] * tmp(x, yy);
      }
      out(x, y) = s;
    }
  }
  return out;
}

Plane product(const Plane& a, const Plane& b) {
  Plane out(a.w, a.h);
  for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

void check_shapes(const Image& a, const Image& b) {
  if (!a.same_shape(b) || a.empty()) throw InvalidArgument("image shapes differ or are empty");
}

double ssim_impl(const Image& x_img, const Image& y_img, Image* grad) {
  check_shapes(x_img, y_img);
  const double n = static_cast<double>(x_img.data.size());
  double total = 0.0;
  if (grad) *grad = Image(x_img.width, x_img.height, x_img.channels);
  for (int c = 0; c < x_img.channels; ++c) {
    const Plane x = channel(x_img, c);
    const Plane y = channel(y_img, c);
    const Plane mu_x = blur(x);
    const Plane mu_y = blur(y);
    const Plane e_xx = blur(product(x, x));
    const Plane e_yy = blur(product(y, y));
    const Plane e_xy = blur(product(x, y));
    Plane d_mu(x.w, x.h), d_exx(x.w, x.h), d_exy(x.w, x.h);
    for (std::size_t i = 0; i < x.v.size(); ++i) {
      const double mx = mu_x.v[i], my = mu_y.v[i];
      const double sxx = e_xx.v[i] - mx * mx;
      const double syy = e_yy.v[i] - my * my;
      const double sxy = e_xy.v[i] - mx * my;
      const double a1 = 2.0 * mx * my + kC1;
      const double a2 = 2.0 * sxy + kC2;
      const double b1 = mx * mx + my * my + kC1;
      const double b2 = sxx + syy + kC2;
      const double s = (a1 * a2) / (b1 * b2);
      total += s;
      if (grad) {
        d_mu.v[i] = (2.0 * my * a2 - 2.0 * my * a1) / (b1 * b2) - s * (2.0 * mx / b1 - 2.0 * mx / b2);
        d_exx.v[i] = -s / b2;
        d_exy.v[i] = 2.0 * a1 / (b1 * b2);
      }
    }
    if (grad) {
      const Plane g_mu = blur(d_mu);
      const Plane g_xx = blur(d_exx);
      const Plane g_xy = blur(d_exy);
      for (int py = 0; py < x.h; ++py) {
        for (int px = 0; px < x.w; ++px) {
          grad->at(px, py, c) = (g_mu(px, py) + 2.0 * x(px, py) * g_xx(px, py) + y(px, py) * g_xy(px, py)) / n;
        }
      }
    }
  }
  return total / n;
}

}  // namespace

double mse(const Image& a, const Image& b) {
  check_shapes(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.data.size());
}

double psnr(const Image& a, const Image& b) {
  const double e = mse(a, b);
  if (e <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / e));
}

double ssim(const Image& a, const Image& b) { return ssim_impl(a, b, nullptr); }

LossValue ssim_with_grad(const Image& rendered, const Image& target) {
  LossValue out;
  out.value = ssim_impl(rendered, target, &out.grad);
  return out;
}

LossValue l1_loss(const Image& rendered, const Image& target) {
  check_shapes(rendered, target);
  LossValue out;
  out.grad = Image(rendered.width, rendered.height, rendered.channels);
  const double n = static_cast<double>(rendered.data.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < rendered.data.size(); ++i) {
    const double d = rendered.data[i] - target.data[i];
    sum += std::abs(d);
    out.grad.data[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
  }
  out.value = sum / n;
  return out;
}

LossValue photometric_loss(const Image& rendered, const Image& target, double lambda_ssim) {
  LossValue l1 = l1_loss(rendered, target);
  if (lambda_ssim == 0.0) return l1;
  const LossValue s = ssim_with_grad(rendered, target);
  LossValue out;
  out.value = (1.0 - lambda_ssim) * l1.value + lambda_ssim * (1.0 - s.value);
  out.grad = std::move(l1.grad);
  for (std::size_t i = 0; i < out.grad.data.size(); ++i) {
    out.grad.data[i] = (1.0 - lambda_ssim) * out.grad.data[i] - lambda_ssim * s.grad.data[i];
  }
  return out;
}

}  // namespace bsplat
