#pragma once

#include <cstdint>

#include "deepfuse/image.hpp"

namespace deepfuse {

/// Registered under/over exposure pair of the same scene.
struct ExposurePair {
    RgbImage under;
    RgbImage over;
    double ev_under = -2.0;
    double ev_over = 2.0;
};

/// Re-exposes a gamma-encoded image: linearize, scale by 2^ev, clip to [0, 1], re-encode.
/// ev == 0 returns the input unchanged.
RgbImage apply_exposure(const RgbImage& base, double ev, double gamma);

ExposurePair synthesize_exposure_pair(const RgbImage& base, double ev_low, double ev_high,
                                      double gamma = 2.2);

/// Procedural test scene with a wide tonal range: graded sky, textured surfaces,
/// bright emitters, and deep shadows. Deterministic in `seed`.
RgbImage synthesize_scene(int height, int width, std::uint64_t seed);

}  // namespace deepfuse
