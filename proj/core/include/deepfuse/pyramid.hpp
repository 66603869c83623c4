#pragma once

#include <vector>

#include "deepfuse/image.hpp"

namespace deepfuse {

enum class PyramidKind { Gaussian, Laplacian };

/// levels[0] is full resolution; each further level halves (rounding up).
/// For a Laplacian pyramid the last level is the low-pass residual.
struct Pyramid {
    PyramidKind kind = PyramidKind::Gaussian;
    std::vector<PlanarImage> levels;
};

/// 5-tap binomial blur ([1 4 6 4 1] / 16) with reflect-101 borders, then 2x decimation.
PlanarImage pyr_down(const PlanarImage& image);
/// Zero-insertion upsample to (height, width) followed by the binomial blur (gain 4).
PlanarImage pyr_up(const PlanarImage& image, int height, int width);

/// floor(log2(min dim)) - 2, at least 1.
int default_pyramid_levels(int height, int width) noexcept;

/// Largest level count not exceeding `requested` with min dim >= 2^(levels - 1).
/// Warns when the request had to be reduced.
int clamp_pyramid_levels(int height, int width, int requested);

Pyramid gaussian_pyramid(const PlanarImage& image, int levels);
Pyramid laplacian_pyramid(const PlanarImage& image, int levels);
PlanarImage collapse(const Pyramid& pyramid);

}  // namespace deepfuse
