#pragma once

#include <span>
#include <vector>

#include "deepfuse/image.hpp"

namespace deepfuse {

/// Contrast / structure / luminance split of a patch: patch == contrast * structure + luminance.
struct PatchDecomposition {
    double contrast = 0.0;          // l2 norm of the mean-subtracted patch
    std::vector<double> structure;  // unit vector, or zeros when degenerate
    double luminance = 0.0;         // patch mean
    bool degenerate = false;        // flat patch (contrast below kFlatContrast)
};

/// Contrast at or below this is treated as a flat (structureless) patch.
inline constexpr double kFlatContrast = 1e-8;

PatchDecomposition decompose_patch(std::span<const double> patch);

/// Ideal local fusion target: highest input contrast times the weighted mean structure.
/// Zero-mean by construction; luminance is discarded.
struct DesiredPatch {
    std::vector<double> values;
    double contrast = 0.0;
    bool degenerate = false;  // both inputs flat
};

/// Structure weights are contrast^exponent, so the higher-contrast patch dominates
/// when the structures agree.
DesiredPatch desired_patch(std::span<const double> first, std::span<const double> second,
                           double exponent);

/// (2 cov + C) / (var_desired + var_fused + C), evaluated in the algebraically equivalent
/// form 1 - mean_sq_diff / (var_desired + var_fused + C). Clamped to [-1, 1].
double score_at(std::span<const double> desired, std::span<const double> fused, double stability);

struct MefSsimConfig {
    int window = 8;
    int stride = 1;
    double stability = 0.03 * 0.03;
    int scales = 3;
    double structure_exponent = 4.0;

    void validate() const;
};

/// Per-pixel scores at the finest scale, scaled by the coarser-scale means so that
/// the map average equals the overall score (exactly when stride divides the dims).
using ScoreMap = PlanarImage;

struct MefSsimResult {
    double score = 0.0;
    std::vector<double> scale_scores;  // finest first
    ScoreMap map;
};

/// Multi-scale MEF-SSIM of `fused` against the two exposures. Each scale averages window
/// scores over evaluation sites; scales combine by product. Scales whose extent would fall
/// below the window are dropped with a warning.
MefSsimResult mef_ssim(const PlanarImage& under, const PlanarImage& over,
                       const PlanarImage& fused, const MefSsimConfig& config = {});

struct MefSsimLossGrad {
    double loss = 0.0;  // 1 - score
    PlanarImage gradient;
    std::vector<double> scale_scores;
};

/// Loss and its exact gradient with respect to every fused pixel. The desired patches
/// depend only on the inputs and are constants here.
MefSsimLossGrad mef_ssim_loss_grad(const PlanarImage& under, const PlanarImage& over,
                                   const PlanarImage& fused, const MefSsimConfig& config = {});

/// Number of scales actually usable for an image of the given size.
int usable_scales(int height, int width, const MefSsimConfig& config) noexcept;

}  // namespace deepfuse
