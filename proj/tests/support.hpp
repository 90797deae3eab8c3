#pragma once

// Shared fixtures and oracles for the test binaries. Nothing here calls into
// backward(); the finite-difference oracle only uses the forward renderer.

#include "render.hpp"
#include "scene.hpp"

#include <functional>
#include <random>

namespace bsplat::testing {

inline Intrinsics square_intrinsics(int size, double focal) {
  Intrinsics k;
  k.width = size;
  k.height = size;
  k.fx = focal;
  k.fy = focal;
  k.cx = size / 2;
  k.cy = size / 2;
  return k;
}

// Camera at the origin looking down +z.
inline CameraView origin_camera(int size, double focal) {
  CameraView v;
  v.id = "origin";
  v.intrinsics = square_intrinsics(size, focal);
  return v;
}

inline Vec4 random_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec4 q(n(rng), n(rng), n(rng), n(rng));
  return q / q.norm();
}

// Five-ish primitives in front of origin_camera(32, 32): moderate opacity so
// no pixel saturates the alpha clamp or the transmittance stop.
inline Scene random_scene(std::mt19937_64& rng, int count = 5) {
  std::uniform_real_distribution<double> xy(-0.45, 0.45), z(3.0, 5.0), ls(std::log(0.12), std::log(0.45)),
      op(0.2, 0.8), col(0.1, 0.9);
  Scene s;
  for (int i = 0; i < count; ++i) {
    GaussianPrimitive g;
    g.mean = Vec3(xy(rng), xy(rng), z(rng));
    g.log_scale = Vec3(ls(rng), ls(rng), ls(rng));
    g.rotation = random_quaternion(rng);
    g.set_opacity(op(rng));
    g.set_rgb(Vec3(col(rng), col(rng), col(rng)));
    s.primitives.push_back(g);
  }
  s.assignment.assign(s.primitives.size(), 0);
  return s;
}

inline Image random_image(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(w, h, 3);
  for (auto& v : img.data) v = u(rng);
  return img;
}

// Sum of squared differences and its gradient.
inline double l2_loss(const Image& rendered, const Image& target, Image* grad) {
  double sum = 0.0;
  if (grad) *grad = Image(rendered.width, rendered.height, rendered.channels);
  for (std::size_t i = 0; i < rendered.data.size(); ++i) {
    const double d = rendered.data[i] - target.data[i];
    sum += d * d;
    if (grad) grad->data[i] = 2.0 * d;
  }
  return sum;
}

// Parameter classes addressed by the finite-difference oracle.
enum class ParamClass { Mean, LogScale, Rotation, Opacity, Color };
inline constexpr ParamClass kAllParamClasses[] = {ParamClass::Mean, ParamClass::LogScale, ParamClass::Rotation,
                                                  ParamClass::Opacity, ParamClass::Color};

inline const char* param_name(ParamClass c) {
  switch (c) {
    case ParamClass::Mean: return "mean";
    case ParamClass::LogScale: return "log_scale";
    case ParamClass::Rotation: return "rotation";
    case ParamClass::Opacity: return "opacity_logit";
    case ParamClass::Color: return "color";
  }
  return "?";
}

inline int param_dims(ParamClass c) {
  switch (c) {
    case ParamClass::Mean:
    case ParamClass::LogScale:
    case ParamClass::Color: return 3;
    case ParamClass::Rotation: return 4;
    case ParamClass::Opacity: return 1;
  }
  return 0;
}

inline double& param_ref(GaussianPrimitive& g, ParamClass c, int d) {
  switch (c) {
    case ParamClass::Mean: return g.mean[d];
    case ParamClass::LogScale: return g.log_scale[d];
    case ParamClass::Rotation: return g.rotation[d];
    case ParamClass::Opacity: return g.opacity_logit;
    case ParamClass::Color: return g.color_dc[d];
  }
  return g.opacity_logit;
}

inline double grad_value(const GradientBuffer& gb, std::size_t i, ParamClass c, int d) {
  switch (c) {
    case ParamClass::Mean: return gb.mean[i][d];
    case ParamClass::LogScale: return gb.log_scale[i][d];
    case ParamClass::Rotation: return gb.rotation[i][d];
    case ParamClass::Opacity: return gb.opacity_logit[i];
    case ParamClass::Color: return gb.color_dc[i][d];
  }
  return 0.0;
}

struct FdComparison {
  double analytic_sq = 0.0;
  double fd_sq = 0.0;
  double diff_sq = 0.0;
  int entries = 0;
  int skipped = 0;  // coordinates whose +/- renders straddle a footprint change

  double relative_error() const { return fd_sq > 0.0 ? std::sqrt(diff_sq / fd_sq) : std::sqrt(diff_sq); }
};

// Footprint signature of a render: per-primitive pixel counts plus the
// composited prefix length per pixel. Equal signatures mean the loss is a
// smooth function along the segment between the two renders.
inline bool same_footprint(const RenderOutput& a, const RenderOutput& b) {
  if (a.contributors != b.contributors) return false;
  for (std::size_t i = 0; i < a.touches.size(); ++i) {
    if (a.touches[i].footprint_pixels != b.touches[i].footprint_pixels) return false;
  }
  for (std::size_t i = 0; i < a.projected.size(); ++i) {
    const auto& p = a.projected[i];
    const auto& q = b.projected[i];
    if (p.x0 != q.x0 || p.x1 != q.x1 || p.y0 != q.y0 || p.y1 != q.y1) return false;
  }
  return true;
}

// Central finite differences of loss(render(scene)) w.r.t. every parameter of
// class `c`, compared against `analytic`.
inline FdComparison compare_with_finite_differences(const Scene& scene, const CameraView& view, const Image& target,
                                                    const Vec3& background, const GradientBuffer& analytic,
                                                    ParamClass c, double eps = 1e-4) {
  FdComparison out;
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    for (int d = 0; d < param_dims(c); ++d) {
      Scene plus = scene, minus = scene;
      double& vp = param_ref(plus.primitives[i], c, d);
      double& vm = param_ref(minus.primitives[i], c, d);
      vp += eps;
      vm -= eps;
      const double step = vp - vm;
      const RenderOutput rp = render(plus, view, background);
      const RenderOutput rm = render(minus, view, background);
      if (!same_footprint(rp, rm)) {
        ++out.skipped;
        continue;
      }
      const double fd = (l2_loss(rp.image, target, nullptr) - l2_loss(rm.image, target, nullptr)) / step;
      const double an = grad_value(analytic, i, c, d);
      out.analytic_sq += an * an;
      out.fd_sq += fd * fd;
      out.diff_sq += (an - fd) * (an - fd);
      ++out.entries;
    }
  }
  return out;
}

}  // namespace bsplat::testing
