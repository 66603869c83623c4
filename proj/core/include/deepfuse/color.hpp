#pragma once

#include "deepfuse/image.hpp"

namespace deepfuse {

/// Full-range BT.601 (JPEG) YCbCr. Y is normalized to [0, 1]; Cb and Cr use the
/// 8-bit convention, [0, 255] centred at 128.
struct YCbCrImage {
    PlanarImage y;
    PlanarImage cb;
    PlanarImage cr;
};

inline constexpr double kChromaNeutral = 128.0;

YCbCrImage rgb_to_ycbcr(const RgbImage& rgb);
RgbImage ycbcr_to_rgb(const YCbCrImage& ycc);

/// Y plane only.
PlanarImage luminance(const RgbImage& rgb);

}  // namespace deepfuse
