#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "compc/renderer.hpp"

namespace compc::io {

// 8-bit RGB PNG of the colour buffer (values clamped to [0,1]).
void write_png(const std::filesystem::path& path, const RenderedImage& image);

// Raw little-endian float32 H x W x 3, no header.
void write_raw_rgb(const std::filesystem::path& path, std::span<const double> rgb);
std::vector<double> read_raw_rgb(const std::filesystem::path& path);

}  // namespace compc::io
