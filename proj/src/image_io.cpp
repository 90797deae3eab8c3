#include "image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

namespace bsplat {

Image load_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw DataError("cannot read PNG '" + path.string() + "': " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DataError("cannot decode PNG '" + path.string() + "': " + msg);
  }
  Image out(static_cast<int>(img.width), static_cast<int>(img.height), 3);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = buffer[i] / 255.0;
  return out;
}

void save_png(const Image& image, const std::filesystem::path& path) {
  if (image.empty()) throw InvalidArgument("cannot write an empty image");
  if (image.channels != 3 && image.channels != 1) throw InvalidArgument("PNG output needs 1 or 3 channels");
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(image.data.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const double v = std::clamp(image.data[i], 0.0, 1.0);
    buffer[i] = static_cast<png_byte>(std::lround(v * 255.0));
  }
  if (!png_image_write_to_file(&img, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot write PNG '" + path.string() + "': " + img.message, 0);
  }
}

Image quantize8(const Image& image) {
  Image out = image;
  for (double& v : out.data) v = static_cast<double>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0;
  return out;
}

Image load_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  in.get();
  if ((magic != "PF" && magic != "Pf") || w <= 0 || h <= 0 || scale == 0.0) {
    throw IoError("malformed PFM header in '" + path.string() + "'", 0);
  }
  if (scale > 0.0) throw IoError("big-endian PFM is not supported: '" + path.string() + "'", 0);
  const int c = magic == "PF" ? 3 : 1;
  const auto header_end = static_cast<std::uint64_t>(in.tellg());
  std::vector<float> row(static_cast<std::size_t>(w) * c);
  Image out(w, h, c);
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw IoError("truncated PFM '" + path.string() + "'", header_end);
    for (std::size_t i = 0; i < row.size(); ++i) out.data[static_cast<std::size_t>(y) * row.size() + i] = row[i];
  }
  return out;
}

void save_pfm(const Image& image, const std::filesystem::path& path) {
  if (image.empty()) throw InvalidArgument("cannot write an empty image");
  if (image.channels != 3 && image.channels != 1) throw InvalidArgument("PFM output needs 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'", 0);
  out << (image.channels == 3 ? "PF" : "Pf") << '\n' << image.width << ' ' << image.height << "\n-1.0\n";
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  std::vector<float> row(stride);
  for (int y = image.height - 1; y >= 0; --y) {
    for (std::size_t i = 0; i < stride; ++i) row[i] = static_cast<float>(image.data[static_cast<std::size_t>(y) * stride + i]);
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(stride * sizeof(float)));
  }
}

namespace {
std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext;
}
}  // namespace

Image load_image(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return load_png(path);
  if (ext == ".pfm") return load_pfm(path);
  throw DataError("unsupported image format '" + path.string() + "'");
}

void save_image(const Image& image, const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return save_png(image, path);
  if (ext == ".pfm") return save_pfm(image, path);
  throw InvalidArgument("unsupported image format '" + path.string() + "'");
}

Image box_downsample(const Image& image, int factor) {
  if (factor < 1) throw InvalidArgument("downsample factor must be >= 1");
  if (factor == 1) return image;
  const int w = image.width / factor;
  const int h = image.height / factor;
  if (w == 0 || h == 0) throw DataError("image is too small to downsample");
  Image out(w, h, image.channels);
  const double norm = 1.0 / (factor * factor);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        double sum = 0.0;
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) sum += image.at(x * factor + dx, y * factor + dy, c);
        }
        out.at(x, y, c) = sum * norm;
      }
    }
  }
  return out;
}

Image gray_image(const std::vector<double>& values, int width, int height) {
  if (values.size() != static_cast<std::size_t>(width) * height) throw InvalidArgument("buffer size mismatch");
  Image out(width, height, 1);
  out.data = values;
  return out;
}

}  // namespace bsplat
