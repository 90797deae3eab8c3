#include "render.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bsplat {

void GradientBuffer::resize(std::size_t n) {
  mean.assign(n, Vec3::Zero());
  log_scale.assign(n, Vec3::Zero());
  rotation.assign(n, Vec4::Zero());
  opacity_logit.assign(n, 0.0);
  color_dc.assign(n, Vec3::Zero());
  mean2d.assign(n, Vec2::Zero());
}

namespace {

ProjectedPrimitive project(const GaussianPrimitive& g, const CameraView& view) {
  ProjectedPrimitive p;
  const auto& k = view.intrinsics;
  p.cam_mean = view.to_camera(g.mean);
  const double x = p.cam_mean.x(), y = p.cam_mean.y(), z = p.cam_mean.z();
  if (z <= kNearPlane) return p;

  p.rotation = g.rotation_matrix();
  p.scale = g.scale();
  const Mat3 m = p.rotation * p.scale.asDiagonal();
  p.cov3d = m * m.transpose();

  Eigen::Matrix<double, 2, 3> j;
  j << k.fx / z, 0.0, -k.fx * x / (z * z), 0.0, k.fy / z, -k.fy * y / (z * z);
  p.jw = j * view.rotation;
  Mat2 cov2d = p.jw * p.cov3d * p.jw.transpose();
  cov2d(0, 0) += kCovarianceDilation;
  cov2d(1, 1) += kCovarianceDilation;
  const double det = cov2d.determinant();
  if (!(det > 0.0)) return p;
  p.conic << cov2d(1, 1) / det, -cov2d(0, 1) / det, -cov2d(1, 0) / det, cov2d(0, 0) / det;

  p.mean2d = Vec2(k.fx * x / z + k.cx, k.fy * y / z + k.cy);
  const double mid = 0.5 * (cov2d(0, 0) + cov2d(1, 1));
  const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  const double radius = 3.0 * std::sqrt(lambda_max);
  const double fx0 = std::floor(p.mean2d.x() - radius), fx1 = std::ceil(p.mean2d.x() + radius);
  const double fy0 = std::floor(p.mean2d.y() - radius), fy1 = std::ceil(p.mean2d.y() + radius);
  if (fx1 < 0.0 || fy1 < 0.0 || fx0 > k.width - 1 || fy0 > k.height - 1) return p;
  p.x0 = static_cast<int>(std::max(0.0, fx0));
  p.y0 = static_cast<int>(std::max(0.0, fy0));
  p.x1 = static_cast<int>(std::min<double>(k.width - 1, fx1));
  p.y1 = static_cast<int>(std::min<double>(k.height - 1, fy1));

  p.opacity = g.opacity();
  p.color = g.rgb();
  p.visible = true;
  return p;
}

inline bool covers(const ProjectedPrimitive& p, int x, int y) {
  return x >= p.x0 && x <= p.x1 && y >= p.y0 && y <= p.y1;
}

// Gaussian falloff exponent at pixel (x, y); d = pixel - mean.
inline double falloff_power(const ProjectedPrimitive& p, double dx, double dy) {
  return -0.5 * (p.conic(0, 0) * dx * dx + p.conic(1, 1) * dy * dy) - p.conic(0, 1) * dx * dy;
}

struct TileRange {
  int x0, y0, x1, y1;  // exclusive upper bounds
};

TileRange tile_range(const RenderOutput& out, int tile, int width, int height) {
  const int tx = tile % out.tiles_x;
  const int ty = tile / out.tiles_x;
  return {tx * kTileSize, ty * kTileSize, std::min(width, (tx + 1) * kTileSize),
          std::min(height, (ty + 1) * kTileSize)};
}

}  // namespace

RenderOutput render(const Scene& scene, const CameraView& view, const Vec3& background,
                    const RenderSettings& settings) {
  view.validate();
  const int width = view.intrinsics.width;
  const int height = view.intrinsics.height;
  const std::size_t n = scene.primitives.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!scene.primitives[i].finite()) {
      throw DataError("primitive " + std::to_string(i) + " has non-finite parameters");
    }
  }

  RenderOutput out;
  out.background = background;
  out.image = Image(width, height, 3);
  out.transmittance.assign(static_cast<std::size_t>(width) * height, 1.0);
  out.contributors.assign(static_cast<std::size_t>(width) * height, 0);
  out.touches.assign(n, TouchRecord{});
  out.projected.resize(n);
  parallel_for(n, settings.workers, [&](std::size_t i) { out.projected[i] = project(scene.primitives[i], view); });

  std::vector<int> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (out.projected[i].visible) order.push_back(static_cast<int>(i));
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return out.projected[a].cam_mean.z() < out.projected[b].cam_mean.z();
  });

  out.tiles_x = (width + kTileSize - 1) / kTileSize;
  out.tiles_y = (height + kTileSize - 1) / kTileSize;
  out.tile_lists.assign(static_cast<std::size_t>(out.tiles_x) * out.tiles_y, {});
  for (int idx : order) {
    const auto& p = out.projected[idx];
    for (int ty = p.y0 / kTileSize; ty <= p.y1 / kTileSize; ++ty) {
      for (int tx = p.x0 / kTileSize; tx <= p.x1 / kTileSize; ++tx) {
        out.tile_lists[static_cast<std::size_t>(ty) * out.tiles_x + tx].push_back(idx);
      }
    }
  }

  // Per-tile partial statistics, reduced below in tile order.
  std::vector<std::vector<TouchRecord>> partial(out.tile_lists.size());
  parallel_for(out.tile_lists.size(), settings.workers, [&](std::size_t tile) {
    const auto& list = out.tile_lists[tile];
    auto& local = partial[tile];
    local.assign(list.size(), TouchRecord{});
    const TileRange r = tile_range(out, static_cast<int>(tile), width, height);
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        double t = 1.0;
        Vec3 color = Vec3::Zero();
        bool done = false;
        int contributors = 0;
        for (std::size_t j = 0; j < list.size(); ++j) {
          const auto& p = out.projected[list[j]];
          if (!covers(p, x, y)) continue;
          const double power = falloff_power(p, x - p.mean2d.x(), y - p.mean2d.y());
          if (power > 0.0) continue;
          const double raw_alpha = p.opacity * std::exp(power);
          if (!(raw_alpha > kAlphaCutoff)) continue;
          ++local[j].footprint_pixels;
          if (done) continue;  // occluded: effective opacity is zero here
          const double alpha = std::min(kAlphaClamp, raw_alpha);
          const double next_t = t * (1.0 - alpha);
          if (next_t < kTransmittanceStop) {
            done = true;
            continue;
          }
          local[j].sum_alpha_hat += alpha * t;
          color += p.color * (alpha * t);
          t = next_t;
          contributors = static_cast<int>(j) + 1;
        }
        const std::size_t pix = static_cast<std::size_t>(y) * width + x;
        out.transmittance[pix] = t;
        out.contributors[pix] = contributors;
        for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = color[c] + background[c] * t;
      }
    }
  });

  for (std::size_t tile = 0; tile < partial.size(); ++tile) {
    const auto& list = out.tile_lists[tile];
    for (std::size_t j = 0; j < list.size(); ++j) {
      auto& dst = out.touches[list[j]];
      dst.footprint_pixels += partial[tile][j].footprint_pixels;
      dst.sum_alpha_hat += partial[tile][j].sum_alpha_hat;
    }
  }
  return out;
}

namespace {

// Screen-space gradient accumulators for one primitive.
struct ScreenGrad {
  Vec2 mean2d = Vec2::Zero();
  double conic00 = 0.0, conic01 = 0.0, conic11 = 0.0;  // full-matrix entries; 01 is per off-diagonal entry
  double opacity = 0.0;                                 // w.r.t. sigmoid(opacity_logit)
  Vec3 color = Vec3::Zero();                            // w.r.t. rgb
  double abs_grad = 0.0;

  void add(const ScreenGrad& o) {
    mean2d += o.mean2d;
    conic00 += o.conic00;
    conic01 += o.conic01;
    conic11 += o.conic11;
    opacity += o.opacity;
    color += o.color;
    abs_grad += o.abs_grad;
  }
};

// d(loss)/d(q) for the (w, x, y, z) quaternion given d(loss)/d(R), including
// the normalization q / |q|.
Vec4 quaternion_grad(const Vec4& q_raw, const Mat3& g) {
  const double norm = q_raw.norm();
  const Vec4 q = q_raw / norm;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Vec4 dq;
  dq[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
  dq[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
               w * g(2, 1) - 2 * x * g(2, 2));
  dq[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
               z * g(2, 1) - 2 * y * g(2, 2));
  dq[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) + y * g(1, 2) +
               x * g(2, 0) + y * g(2, 1));
  return (dq - q * q.dot(dq)) / norm;
}

}  // namespace

GradientBuffer backward(const Scene& scene, const CameraView& view, RenderOutput& forward,
                        const Image& loss_grad, const RenderSettings& settings) {
  const int width = view.intrinsics.width;
  const int height = view.intrinsics.height;
  if (!loss_grad.same_shape(forward.image) || loss_grad.width != width || loss_grad.height != height) {
    throw InvalidArgument("loss gradient image shape does not match the rendered image");
  }
  const std::size_t n = scene.primitives.size();
  if (forward.projected.size() != n) throw InvalidArgument("forward render does not match the scene");

  std::vector<std::vector<ScreenGrad>> partial(forward.tile_lists.size());
  parallel_for(forward.tile_lists.size(), settings.workers, [&](std::size_t tile) {
    const auto& list = forward.tile_lists[tile];
    auto& local = partial[tile];
    local.assign(list.size(), ScreenGrad{});
    const TileRange r = tile_range(forward, static_cast<int>(tile), width, height);
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        const std::size_t pix = static_cast<std::size_t>(y) * width + x;
        const double t_final = forward.transmittance[pix];
        const Vec3 dl_dpix(loss_grad.at(x, y, 0), loss_grad.at(x, y, 1), loss_grad.at(x, y, 2));
        const double bg_dot = forward.background.dot(dl_dpix);
        double t = t_final;
        Vec3 accum = Vec3::Zero();
        double last_alpha = 0.0;
        Vec3 last_color = Vec3::Zero();
        for (int j = forward.contributors[pix] - 1; j >= 0; --j) {
          const auto& p = forward.projected[list[j]];
          if (!covers(p, x, y)) continue;
          const double dx = x - p.mean2d.x();
          const double dy = y - p.mean2d.y();
          const double power = falloff_power(p, dx, dy);
          if (power > 0.0) continue;
          const double falloff = std::exp(power);
          const double raw_alpha = p.opacity * falloff;
          if (!(raw_alpha > kAlphaCutoff)) continue;
          const double alpha = std::min(kAlphaClamp, raw_alpha);
          t /= (1.0 - alpha);

          ScreenGrad& g = local[j];
          g.color += (alpha * t) * dl_dpix;
          accum = last_alpha * last_color + (1.0 - last_alpha) * accum;
          last_color = p.color;
          last_alpha = alpha;
          double dl_dalpha = (p.color - accum).dot(dl_dpix) * t;
          dl_dalpha += -t_final / (1.0 - alpha) * bg_dot;
          if (raw_alpha >= kAlphaClamp) continue;  // clamped: no gradient to opacity or shape

          g.opacity += falloff * dl_dalpha;
          const double dl_dpower = raw_alpha * dl_dalpha;
          // d(power)/d(mean2d) = conic * (pixel - mean)
          const Vec2 dpower_dmean(p.conic(0, 0) * dx + p.conic(0, 1) * dy, p.conic(1, 0) * dx + p.conic(1, 1) * dy);
          const Vec2 pixel_grad = dl_dpower * dpower_dmean;
          g.mean2d += pixel_grad;
          g.abs_grad += pixel_grad.norm();
          g.conic00 += dl_dpower * (-0.5 * dx * dx);
          g.conic01 += dl_dpower * (-0.5 * dx * dy);
          g.conic11 += dl_dpower * (-0.5 * dy * dy);
        }
      }
    }
  });

  std::vector<ScreenGrad> screen(n);
  for (std::size_t tile = 0; tile < partial.size(); ++tile) {
    const auto& list = forward.tile_lists[tile];
    for (std::size_t j = 0; j < list.size(); ++j) screen[list[j]].add(partial[tile][j]);
  }

  GradientBuffer grads(n);
  const auto& k = view.intrinsics;
  parallel_for(n, settings.workers, [&](std::size_t i) {
    auto& touch = forward.touches[i];
    touch.sum_abs_grad = screen[i].abs_grad;
    const auto& p = forward.projected[i];
    if (!p.visible || touch.footprint_pixels == 0) return;
    const ScreenGrad& s = screen[i];
    const auto& prim = scene.primitives[i];

    grads.color_dc[i] = kShC0 * s.color;
    grads.opacity_logit[i] = s.opacity * p.opacity * (1.0 - p.opacity);
    grads.mean2d[i] = s.mean2d;

    // conic = inverse(cov2d): dL/dcov2d = -conic * dL/dconic * conic
    Mat2 g_conic;
    g_conic << s.conic00, s.conic01, s.conic01, s.conic11;
    const Mat2 g_cov2d = -p.conic * g_conic * p.conic;
    // cov2d = JW cov3d (JW)^T + dilation
    const Mat3 g_cov3d = p.jw.transpose() * g_cov2d * p.jw;
    const Eigen::Matrix<double, 2, 3> g_jw = 2.0 * g_cov2d * p.jw * p.cov3d;
    const Eigen::Matrix<double, 2, 3> g_j = g_jw * view.rotation.transpose();

    const double x = p.cam_mean.x(), y = p.cam_mean.y(), z = p.cam_mean.z();
    const double z2 = z * z, z3 = z2 * z;
    Vec3 g_cam;
    g_cam.x() = g_j(0, 2) * (-k.fx / z2) + s.mean2d.x() * k.fx / z;
    g_cam.y() = g_j(1, 2) * (-k.fy / z2) + s.mean2d.y() * k.fy / z;
    g_cam.z() = g_j(0, 0) * (-k.fx / z2) + g_j(0, 2) * (2.0 * k.fx * x / z3) + g_j(1, 1) * (-k.fy / z2) +
                g_j(1, 2) * (2.0 * k.fy * y / z3) + s.mean2d.x() * (-k.fx * x / z2) + s.mean2d.y() * (-k.fy * y / z2);
    grads.mean[i] = view.rotation.transpose() * g_cam;

    // cov3d = M M^T with M = R diag(s)
    const Mat3 m = p.rotation * p.scale.asDiagonal();
    const Mat3 g_m = 2.0 * g_cov3d * m;
    Mat3 g_r;
    for (int a = 0; a < 3; ++a) {
      double g_s = 0.0;
      for (int r = 0; r < 3; ++r) {
        g_s += g_m(r, a) * p.rotation(r, a);
        g_r(r, a) = g_m(r, a) * p.scale[a];
      }
      grads.log_scale[i][a] = g_s * p.scale[a];
    }
    grads.rotation[i] = quaternion_grad(prim.rotation, g_r);
  });
  return grads;
}

}  // namespace bsplat
