#pragma once

#include "scene.hpp"

#include <vector>

namespace bsplat {

inline constexpr double kAlphaCutoff = 1.0 / 255.0;  // footprint: alpha > cutoff
inline constexpr double kAlphaClamp = 0.99;
inline constexpr double kTransmittanceStop = 1e-4;
inline constexpr double kCovarianceDilation = 0.3;  // pixels^2, added to the 2D covariance diagonal
inline constexpr double kNearPlane = 0.01;
inline constexpr int kTileSize = 16;

struct RenderSettings {
  int workers = 1;
};

// Per-primitive record for one view.
struct TouchRecord {
  std::int64_t footprint_pixels = 0;  // |Omega_i|
  double sum_alpha_hat = 0.0;         // sum over Omega_i of alpha_p * T_p
  double sum_abs_grad = 0.0;          // sum over Omega_i of |grad_p|, set by backward()
};

// Screen-space state of one primitive for one view.
struct ProjectedPrimitive {
  bool visible = false;
  Vec3 cam_mean = Vec3::Zero();
  Vec2 mean2d = Vec2::Zero();
  Mat2 conic = Mat2::Zero();  // inverse of the dilated 2D covariance
  Mat3 cov3d = Mat3::Zero();
  Eigen::Matrix<double, 2, 3> jw = Eigen::Matrix<double, 2, 3>::Zero();  // J * W
  Mat3 rotation = Mat3::Identity();
  Vec3 scale = Vec3::Ones();
  double opacity = 0.0;
  Vec3 color = Vec3::Zero();
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive pixel bounds
};

struct RenderOutput {
  Image image;
  std::vector<double> transmittance;  // final T per pixel, row-major
  std::vector<TouchRecord> touches;   // one per primitive

  // State reused by backward().
  Vec3 background = Vec3::Zero();
  std::vector<ProjectedPrimitive> projected;
  std::vector<std::vector<int>> tile_lists;  // depth-sorted primitive indices per tile
  std::vector<int> contributors;             // per pixel: tile-list prefix length that was composited
  int tiles_x = 0;
  int tiles_y = 0;
};

// Loss gradients per primitive. Entries of primitives without footprint are
// exactly zero.
struct GradientBuffer {
  std::vector<Vec3> mean;
  std::vector<Vec3> log_scale;
  std::vector<Vec4> rotation;
  std::vector<double> opacity_logit;
  std::vector<Vec3> color_dc;
  // Signed, pixel-summed gradient w.r.t. the projected 2D mean (pixels).
  std::vector<Vec2> mean2d;

  explicit GradientBuffer(std::size_t n = 0) { resize(n); }
  void resize(std::size_t n);
  std::size_t size() const { return mean.size(); }
};

// Front-to-back alpha compositing of the depth-sorted primitives over
// `background`. Deterministic for any worker count.
RenderOutput render(const Scene& scene, const CameraView& view, const Vec3& background,
                    const RenderSettings& settings = {});

// Analytic gradients of a scalar loss given dLoss/dPixel (same shape as the
// rendered image). Fills forward.touches[i].sum_abs_grad.
GradientBuffer backward(const Scene& scene, const CameraView& view, RenderOutput& forward,
                        const Image& loss_grad, const RenderSettings& settings = {});

}  // namespace bsplat
