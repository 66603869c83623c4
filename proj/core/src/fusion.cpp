#include "deepfuse/fusion.hpp"

#include <chrono>
#include <cmath>

#include <json.hpp>

#include "deepfuse/color.hpp"
#include "deepfuse/error.hpp"

namespace deepfuse {

double fuse_chroma(double x1, double x2, double tau) {
    if (x1 == x2) return x1;
    const double w1 = std::abs(x1 - tau);
    const double w2 = std::abs(x2 - tau);
    const double total = w1 + w2;
    if (total == 0.0) return tau;
    return (x1 * w1 + x2 * w2) / total;
}

PlanarImage fuse_luminance(const NetworkParams& params, const PlanarImage& under,
                           const PlanarImage& over, bool anchor_luminance) {
    PlanarImage y = infer(params, under, over);
    if (anchor_luminance) {
        const double target = 0.5 * (mean(under) + mean(over));
        const double shift = target - mean(y);
        for (double& v : y.pixels) v += shift;
    }
    return clamp01(std::move(y));
}

FusionResult fuse_pair(const NetworkParams& params, const ExposurePair& pair,
                       const FusionOptions& options) {
    if (!pair.under.same_dims(pair.over))
        throw InputError("fuse_pair: exposures must share dimensions");
    const auto start = std::chrono::steady_clock::now();

    const YCbCrImage a = rgb_to_ycbcr(pair.under);
    const YCbCrImage b = rgb_to_ycbcr(pair.over);
    YCbCrImage fused;
    fused.y = fuse_luminance(params, a.y, b.y, options.anchor_luminance);
    fused.cb = PlanarImage(a.y.height, a.y.width);
    fused.cr = PlanarImage(a.y.height, a.y.width);
    for (std::size_t i = 0; i < a.y.size(); ++i) {
        fused.cb.pixels[i] = fuse_chroma(a.cb.pixels[i], b.cb.pixels[i]);
        fused.cr.pixels[i] = fuse_chroma(a.cr.pixels[i], b.cr.pixels[i]);
    }

    FusionResult result;
    result.fused = ycbcr_to_rgb(fused);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    MefSsimResult score = mef_ssim(a.y, b.y, fused.y, options.metric);
    result.report.image_id = options.image_id;
    result.report.score = score.score;
    result.report.scale_scores = std::move(score.scale_scores);
    result.report.seconds = elapsed;
    if (options.keep_score_map) result.score_map = std::move(score.map);
    result.planes = std::move(fused);
    return result;
}

std::string to_json(const FusionReport& report) {
    nlohmann::json j;
    j["image_id"] = report.image_id;
    j["score"] = report.score;
    j["scale_scores"] = report.scale_scores;
    j["seconds"] = report.seconds;
    return j.dump();
}

}  // namespace deepfuse
