#pragma once

#include <string>
#include <vector>

#include "deepfuse/color.hpp"
#include "deepfuse/exposure.hpp"
#include "deepfuse/mefssim.hpp"
#include "deepfuse/network.hpp"

namespace deepfuse {

/// Chroma-weighted fusion of one Cb (or Cr) sample: each value is weighted by its
/// distance from the neutral point tau. Both values at tau yields tau.
double fuse_chroma(double x1, double x2, double tau = 128.0);

struct FusionReport {
    std::string image_id;
    double score = 0.0;
    std::vector<double> scale_scores;
    double seconds = 0.0;
};

struct FusionOptions {
    MefSsimConfig metric;
    std::string image_id;
    // Shift the raw network luminance so its mean matches the mean of the two inputs
    // before clamping. The metric is blind to a global offset, so training leaves the
    // output level unconstrained.
    bool anchor_luminance = true;
    bool keep_score_map = false;
};

struct FusionResult {
    RgbImage fused;
    YCbCrImage planes;  // fused Y (clamped), Cb and Cr before recomposition
    FusionReport report;
    ScoreMap score_map;     // filled when keep_score_map is set
};

/// CNN on luminance, tau-weighted chroma, recomposition to RGB in [0, 1].
FusionResult fuse_pair(const NetworkParams& params, const ExposurePair& pair,
                       const FusionOptions& options = {});

/// Network luminance for a pair of Y planes, anchored (optionally) and clamped to [0, 1].
PlanarImage fuse_luminance(const NetworkParams& params, const PlanarImage& under,
                           const PlanarImage& over, bool anchor_luminance = true);

/// Single-line JSON: {"image_id","score","scale_scores","seconds"}.
std::string to_json(const FusionReport& report);

}  // namespace deepfuse
