#pragma once

#include "deepfuse/image.hpp"

namespace deepfuse {

/// Gaussian-windowed single-scale SSIM over valid windows.
struct SsimConfig {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

struct SsimGrad {
    double value = 0.0;
    PlanarImage gradient;  // d value / d a
};

double ssim(const PlanarImage& a, const PlanarImage& b, const SsimConfig& config = {});
SsimGrad ssim_with_grad(const PlanarImage& a, const PlanarImage& b, const SsimConfig& config = {});

}  // namespace deepfuse
