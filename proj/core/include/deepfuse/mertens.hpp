#pragma once

#include <span>
#include <vector>

#include "deepfuse/image.hpp"

namespace deepfuse {

struct MertensExponents {
    double contrast = 1.0;
    double saturation = 1.0;
    double exposedness = 1.0;
};

inline constexpr double kWellExposedSigma = 0.2;
inline constexpr double kWeightFloor = 1e-12;

/// contrast^wc * saturation^ws * well_exposedness^we per pixel, where contrast is the
/// absolute 3x3 Laplacian of luminance, saturation the RGB standard deviation, and
/// well-exposedness a Gaussian around 0.5 multiplied over channels.
PlanarImage quality_weights(const RgbImage& image, const MertensExponents& exponents = {});

/// One plane per input, summing to 1 at every pixel: (w_k + eps) / sum_j (w_j + eps).
struct WeightMap {
    std::vector<PlanarImage> planes;
};
WeightMap normalize_weights(std::span<const PlanarImage> raw);

/// Weighted Laplacian-pyramid blending; levels <= 0 selects the default depth.
/// Output is clipped to [0, 1].
RgbImage mertens_fuse(std::span<const RgbImage> images, const MertensExponents& exponents = {},
                      int levels = 0);

}  // namespace deepfuse
