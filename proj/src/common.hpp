#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

// Error hierarchy. The C API maps each class onto a status code, the CLI onto
// an exit code (config 1, data 2, divergence 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public DataError {
 public:
  IoError(const std::string& what, std::uint64_t offset)
      : DataError(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::int64_t iteration)
      : Error(what + " at iteration " + std::to_string(iteration)), iteration_(iteration) {}
  std::int64_t iteration() const noexcept { return iteration_; }

 private:
  std::int64_t iteration_;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Interleaved H x W x C image, row-major, linear values (nominally [0,1]).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c = 3, double fill = 0.0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  bool empty() const noexcept { return width <= 0 || height <= 0; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width) * height; }
  double& at(int x, int y, int ch) { return data[(static_cast<std::size_t>(y) * width + x) * channels + ch]; }
  double at(int x, int y, int ch) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + ch];
  }
  bool same_shape(const Image& o) const noexcept {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace bsplat
