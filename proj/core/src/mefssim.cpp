#include "deepfuse/mefssim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "deepfuse/error.hpp"
#include "deepfuse/log.hpp"

namespace deepfuse {
namespace {

// Evaluation sites along one axis. Site k represents pixels [k*stride, (k+1)*stride) and
// is scored with the window centred on it, clamped inside the image. Sites that clamp to
// the same anchor share one evaluation.
struct AxisSites {
    std::vector<int> anchors;         // distinct window origins
    std::vector<int> multiplicity;    // sites per distinct origin
    std::vector<int> site_to_anchor;  // index into anchors, one per site
};

AxisSites make_axis_sites(int extent, int window, int stride) {
    AxisSites sites;
    for (int start = 0; start < extent; start += stride) {
        const int center = std::min(start + stride / 2, extent - 1);
        const int anchor = std::clamp(center - window / 2, 0, extent - window);
        if (sites.anchors.empty() || sites.anchors.back() != anchor) {
            sites.anchors.push_back(anchor);
            sites.multiplicity.push_back(0);
        }
        sites.multiplicity.back() += 1;
        sites.site_to_anchor.push_back(static_cast<int>(sites.anchors.size()) - 1);
    }
    return sites;
}

void gather(const PlanarImage& image, int y0, int x0, int window, std::vector<double>& out) {
    out.resize(static_cast<std::size_t>(window) * window);
    for (int y = 0; y < window; ++y) {
        const double* src = &image.pixels[static_cast<std::size_t>(y0 + y) * image.width + x0];
        std::copy(src, src + window, &out[static_cast<std::size_t>(y) * window]);
    }
}

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

// Shared core of score_at: returns the score and, when grad is non-null, d score / d fused.
double window_score(std::span<const double> desired, std::span<const double> fused,
                    double stability, std::vector<double>* grad) {
    const std::size_t n = fused.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    const double mu_d = sum(desired) * inv_n;
    const double mu_f = sum(fused) * inv_n;
    double sq_diff = 0.0;
    double var_d = 0.0;
    double var_f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = desired[i] - mu_d;
        const double f = fused[i] - mu_f;
        sq_diff += (f - d) * (f - d);
        var_d += d * d;
        var_f += f * f;
    }
    var_d *= inv_n;
    var_f *= inv_n;
    const double denom = var_d + var_f + stability;
    const double mean_sq_diff = sq_diff * inv_n;
    const double score = 1.0 - mean_sq_diff / denom;

    if (grad != nullptr) {
        grad->resize(n);
        const double inv_denom2 = 1.0 / (denom * denom);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = desired[i] - mu_d;
            const double f = fused[i] - mu_f;
            const double d_sqdiff = 2.0 * (f - d) * inv_n;
            const double d_varf = 2.0 * f * inv_n;
            (*grad)[i] = -(d_sqdiff * denom - mean_sq_diff * d_varf) * inv_denom2;
        }
    }
    return std::clamp(score, -1.0, 1.0);
}

struct ScaleOutcome {
    double mean = 0.0;
    std::vector<double> site_scores;  // rows of sites, row-major
    int site_rows = 0;
    int site_cols = 0;
    PlanarImage gradient;  // d mean / d fused at this scale (only when requested)
};

ScaleOutcome evaluate_scale(const PlanarImage& under, const PlanarImage& over,
                            const PlanarImage& fused, const MefSsimConfig& cfg, int scale,
                            bool want_grad) {
    const int w = cfg.window;
    const AxisSites ys = make_axis_sites(fused.height, w, cfg.stride);
    const AxisSites xs = make_axis_sites(fused.width, w, cfg.stride);
    const std::size_t site_count = ys.site_to_anchor.size() * xs.site_to_anchor.size();
    const double site_weight = 1.0 / static_cast<double>(site_count);

    ScaleOutcome out;
    out.site_rows = static_cast<int>(ys.site_to_anchor.size());
    out.site_cols = static_cast<int>(xs.site_to_anchor.size());
    if (want_grad) out.gradient = PlanarImage(fused.height, fused.width);

    std::vector<double> anchor_scores(ys.anchors.size() * xs.anchors.size());
    std::vector<double> pu, po, pf, g;
    double total = 0.0;
    for (std::size_t iy = 0; iy < ys.anchors.size(); ++iy) {
        for (std::size_t ix = 0; ix < xs.anchors.size(); ++ix) {
            const int y0 = ys.anchors[iy];
            const int x0 = xs.anchors[ix];
            gather(under, y0, x0, w, pu);
            gather(over, y0, x0, w, po);
            gather(fused, y0, x0, w, pf);
            const DesiredPatch desired = desired_patch(pu, po, cfg.structure_exponent);

            // Fused equal to both exposures is a perfect match; skip the normalize/rescale
            // round trip so the score is exactly 1 (the gradient is zero there anyway).
            const bool exact = pu == po && pf == pu;
            double score = 1.0;
            if (!desired.degenerate && !exact) {
                score = window_score(desired.values, pf, cfg.stability, want_grad ? &g : nullptr);
                if (!std::isfinite(score)) {
                    throw NumericError("mef_ssim: non-finite score at scale " +
                                       std::to_string(scale) + ", window (" +
                                       std::to_string(y0) + ", " + std::to_string(x0) + ")");
                }
            }
            anchor_scores[iy * xs.anchors.size() + ix] = score;
            const double sites = static_cast<double>(ys.multiplicity[iy]) *
                                 static_cast<double>(xs.multiplicity[ix]);
            const double weight = sites * site_weight;
            total += sites * score;

            if (want_grad && !desired.degenerate && !exact) {
                for (int y = 0; y < w; ++y) {
                    double* dst = &out.gradient.pixels[static_cast<std::size_t>(y0 + y) * fused.width + x0];
                    const double* src = &g[static_cast<std::size_t>(y) * w];
                    for (int x = 0; x < w; ++x) dst[x] += weight * src[x];
                }
            }
        }
    }
    out.mean = total / static_cast<double>(site_count);

    out.site_scores.resize(site_count);
    for (int sy = 0; sy < out.site_rows; ++sy) {
        for (int sx = 0; sx < out.site_cols; ++sx) {
            out.site_scores[static_cast<std::size_t>(sy) * out.site_cols + sx] =
                anchor_scores[static_cast<std::size_t>(ys.site_to_anchor[sy]) * xs.anchors.size() +
                              xs.site_to_anchor[sx]];
        }
    }
    return out;
}

void check_inputs(const PlanarImage& under, const PlanarImage& over, const PlanarImage& fused,
                  const MefSsimConfig& config) {
    config.validate();
    if (!under.same_dims(over) || !under.same_dims(fused))
        throw InputError("mef_ssim: exposures and fused image must share dimensions");
    if (std::min(fused.height, fused.width) < config.window) {
        throw InputError("mef_ssim: image " + std::to_string(fused.height) + "x" +
                         std::to_string(fused.width) + " is smaller than the " +
                         std::to_string(config.window) + "-pixel window");
    }
    if (!all_finite(fused.pixels)) throw NumericError("mef_ssim: fused image has non-finite values");
}

struct Pyramids {
    std::vector<PlanarImage> under, over, fused;
};

Pyramids build_scales(const PlanarImage& under, const PlanarImage& over,
                      const PlanarImage& fused, const MefSsimConfig& config) {
    const int scales = usable_scales(fused.height, fused.width, config);
    if (scales < config.scales) {
        log_warning("mef_ssim: " + std::to_string(fused.height) + "x" +
                    std::to_string(fused.width) + " image supports only " +
                    std::to_string(scales) + " of " + std::to_string(config.scales) + " scales");
    }
    Pyramids p;
    p.under.push_back(under);
    p.over.push_back(over);
    p.fused.push_back(fused);
    for (int s = 1; s < scales; ++s) {
        p.under.push_back(downsample2(p.under.back()));
        p.over.push_back(downsample2(p.over.back()));
        p.fused.push_back(downsample2(p.fused.back()));
    }
    return p;
}

}  // namespace

PatchDecomposition decompose_patch(std::span<const double> patch) {
    if (patch.empty()) throw ConfigError("decompose_patch: empty patch");
    PatchDecomposition d;
    d.luminance = sum(patch) / static_cast<double>(patch.size());
    d.structure.resize(patch.size());
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < patch.size(); ++i) {
        d.structure[i] = patch[i] - d.luminance;
        norm_sq += d.structure[i] * d.structure[i];
    }
    d.contrast = std::sqrt(norm_sq);
    if (d.contrast <= kFlatContrast) {
        d.degenerate = true;
        std::fill(d.structure.begin(), d.structure.end(), 0.0);
    } else {
        for (double& v : d.structure) v /= d.contrast;
    }
    return d;
}

DesiredPatch desired_patch(std::span<const double> first, std::span<const double> second,
                           double exponent) {
    if (first.size() != second.size())
        throw ConfigError("desired_patch: input patches differ in length");
    if (exponent < 0.0) throw ConfigError("desired_patch: structure exponent must be >= 0");

    const PatchDecomposition a = decompose_patch(first);
    const PatchDecomposition b = decompose_patch(second);
    DesiredPatch out;
    out.values.assign(first.size(), 0.0);
    if (a.degenerate && b.degenerate) {
        out.degenerate = true;
        return out;
    }
    out.contrast = std::max(a.contrast, b.contrast);

    const double wa = a.degenerate ? 0.0 : std::pow(a.contrast, exponent);
    const double wb = b.degenerate ? 0.0 : std::pow(b.contrast, exponent);
    const double wsum = wa + wb;
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = (wa * a.structure[i] + wb * b.structure[i]) / wsum;
        norm_sq += out.values[i] * out.values[i];
    }
    const double norm = std::sqrt(norm_sq);
    if (!(norm > 0.0)) {
        // Equal-weight opposite structures cancel; no preferred direction remains.
        std::fill(out.values.begin(), out.values.end(), 0.0);
        return out;
    }
    const double scale = out.contrast / norm;
    for (double& v : out.values) v *= scale;
    return out;
}

double score_at(std::span<const double> desired, std::span<const double> fused, double stability) {
    if (desired.size() != fused.size() || desired.empty())
        throw ConfigError("score_at: patches must be nonempty and of equal length");
    if (!(stability > 0.0)) throw ConfigError("score_at: stability constant must be positive");
    return window_score(desired, fused, stability, nullptr);
}

void MefSsimConfig::validate() const {
    if (window < 2) throw ConfigError("MefSsimConfig: window must be >= 2");
    if (stride < 1) throw ConfigError("MefSsimConfig: stride must be >= 1");
    if (scales < 1) throw ConfigError("MefSsimConfig: scales must be >= 1");
    if (!(stability > 0.0)) throw ConfigError("MefSsimConfig: stability constant must be > 0");
    if (!(structure_exponent >= 0.0))
        throw ConfigError("MefSsimConfig: structure exponent must be >= 0");
}

int usable_scales(int height, int width, const MefSsimConfig& config) noexcept {
    int scales = 0;
    int h = height;
    int w = width;
    while (scales < config.scales && std::min(h, w) >= config.window) {
        ++scales;
        h /= 2;
        w /= 2;
    }
    return scales;
}

MefSsimResult mef_ssim(const PlanarImage& under, const PlanarImage& over,
                       const PlanarImage& fused, const MefSsimConfig& config) {
    check_inputs(under, over, fused, config);
    const Pyramids p = build_scales(under, over, fused, config);
    const std::size_t scales = p.fused.size();

    std::vector<ScaleOutcome> outcomes;
    outcomes.reserve(scales);
    for (std::size_t s = 0; s < scales; ++s) {
        outcomes.push_back(evaluate_scale(p.under[s], p.over[s], p.fused[s], config,
                                          static_cast<int>(s), false));
    }

    MefSsimResult result;
    result.score = 1.0;
    double coarse_product = 1.0;
    for (std::size_t s = 0; s < scales; ++s) {
        result.scale_scores.push_back(outcomes[s].mean);
        result.score *= outcomes[s].mean;
        if (s > 0) coarse_product *= outcomes[s].mean;
    }

    const ScaleOutcome& finest = outcomes.front();
    result.map = PlanarImage(fused.height, fused.width);
    for (int y = 0; y < fused.height; ++y) {
        const int sy = y / config.stride;
        for (int x = 0; x < fused.width; ++x) {
            const int sx = x / config.stride;
            result.map.at(y, x) =
                finest.site_scores[static_cast<std::size_t>(sy) * finest.site_cols + sx] *
                coarse_product;
        }
    }
    return result;
}

MefSsimLossGrad mef_ssim_loss_grad(const PlanarImage& under, const PlanarImage& over,
                                   const PlanarImage& fused, const MefSsimConfig& config) {
    check_inputs(under, over, fused, config);
    const Pyramids p = build_scales(under, over, fused, config);
    const std::size_t scales = p.fused.size();

    std::vector<ScaleOutcome> outcomes;
    outcomes.reserve(scales);
    for (std::size_t s = 0; s < scales; ++s) {
        outcomes.push_back(evaluate_scale(p.under[s], p.over[s], p.fused[s], config,
                                          static_cast<int>(s), true));
    }

    MefSsimLossGrad result;
    double score = 1.0;
    for (const auto& o : outcomes) {
        result.scale_scores.push_back(o.mean);
        score *= o.mean;
    }
    result.loss = 1.0 - score;

    // d loss / d fused = -sum_s (prod_{t != s} m_t) * adjoint_chain(d m_s / d fused_s).
    // Walk from the coarsest scale down, carrying the accumulated coarse gradient.
    PlanarImage carried;
    for (std::size_t s = scales; s-- > 0;) {
        double others = 1.0;
        for (std::size_t t = 0; t < scales; ++t)
            if (t != s) others *= outcomes[t].mean;
        PlanarImage g = outcomes[s].gradient;
        for (double& v : g.pixels) v *= -others;
        if (!carried.empty()) {
            const PlanarImage up = downsample2_adjoint(carried, g.height, g.width);
            for (std::size_t i = 0; i < g.pixels.size(); ++i) g.pixels[i] += up.pixels[i];
        }
        carried = std::move(g);
    }
    result.gradient = std::move(carried);
    if (!all_finite(result.gradient.pixels))
        throw NumericError("mef_ssim_loss_grad: non-finite gradient");
    return result;
}

}  // namespace deepfuse
