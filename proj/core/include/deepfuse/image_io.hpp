#pragma once

#include <filesystem>

#include "deepfuse/image.hpp"

namespace deepfuse {

/// Reads 8/16-bit PNG (gray, gray+alpha, RGB, RGBA; alpha dropped) and binary PPM/PGM.
/// Grayscale is replicated into RGB. Throws InputError on unreadable or unsupported files.
RgbImage read_image(const std::filesystem::path& path);

/// Format from the extension (.png, .ppm, .pgm/.pnm); bit_depth is 8 or 16.
/// .pgm writes the BT.601 luminance.
void write_image(const std::filesystem::path& path, const RgbImage& image, int bit_depth = 8);
void write_image(const std::filesystem::path& path, const PlanarImage& gray, int bit_depth = 8);

}  // namespace deepfuse
