#pragma once

#include "common.hpp"

#include <filesystem>

namespace bsplat {

// 8-bit RGB PNG. Gray and alpha inputs are converted to RGB; values are
// scaled to [0,1]. Writing clamps to [0,1] and rounds to the nearest level.
Image load_png(const std::filesystem::path& path);
void save_png(const Image& image, const std::filesystem::path& path);

// What save_png followed by load_png would return.
Image quantize8(const Image& image);

// Portable float map (PF, little-endian float32, bottom-to-top rows).
Image load_pfm(const std::filesystem::path& path);
void save_pfm(const Image& image, const std::filesystem::path& path);

// Picks the format from the extension (.png or .pfm).
Image load_image(const std::filesystem::path& path);
void save_image(const Image& image, const std::filesystem::path& path);

// Mean over factor x factor blocks; trailing rows/columns that do not fill a
// block are dropped.
Image box_downsample(const Image& image, int factor);

// Single-channel image of a per-pixel buffer (for example transmittance).
Image gray_image(const std::vector<double>& values, int width, int height);

}  // namespace bsplat
