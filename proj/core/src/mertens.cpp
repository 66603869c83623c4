#include "deepfuse/mertens.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deepfuse/color.hpp"
#include "deepfuse/error.hpp"
#include "deepfuse/log.hpp"
#include "deepfuse/pyramid.hpp"

namespace deepfuse {
namespace {

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

PlanarImage laplacian_magnitude(const PlanarImage& gray) {
    PlanarImage out(gray.height, gray.width);
    for (int y = 0; y < gray.height; ++y) {
        for (int x = 0; x < gray.width; ++x) {
            const double lap = gray.at(clamp_index(y - 1, gray.height), x) +
                               gray.at(clamp_index(y + 1, gray.height), x) +
                               gray.at(y, clamp_index(x - 1, gray.width)) +
                               gray.at(y, clamp_index(x + 1, gray.width)) - 4.0 * gray.at(y, x);
            out.at(y, x) = std::abs(lap);
        }
    }
    return out;
}

}  // namespace

PlanarImage quality_weights(const RgbImage& image, const MertensExponents& exponents) {
    const PlanarImage contrast = laplacian_magnitude(luminance(image));
    PlanarImage weights(image.height, image.width);
    const double denom = 2.0 * kWellExposedSigma * kWellExposedSigma;
    for (std::size_t i = 0; i < image.pixel_count(); ++i) {
        const double r = image.data[3 * i];
        const double g = image.data[3 * i + 1];
        const double b = image.data[3 * i + 2];
        const double mu = (r + g + b) / 3.0;
        const double saturation =
            std::sqrt(((r - mu) * (r - mu) + (g - mu) * (g - mu) + (b - mu) * (b - mu)) / 3.0);
        const double exposedness = std::exp(-(r - 0.5) * (r - 0.5) / denom) *
                                   std::exp(-(g - 0.5) * (g - 0.5) / denom) *
                                   std::exp(-(b - 0.5) * (b - 0.5) / denom);
        weights.pixels[i] = std::pow(contrast.pixels[i], exponents.contrast) *
                            std::pow(saturation, exponents.saturation) *
                            std::pow(exposedness, exponents.exposedness);
    }
    return weights;
}

WeightMap normalize_weights(std::span<const PlanarImage> raw) {
    if (raw.empty()) throw ConfigError("normalize_weights: no weight planes");
    for (const auto& p : raw)
        if (!p.same_dims(raw.front())) throw ConfigError("normalize_weights: plane sizes differ");
    WeightMap map;
    map.planes.assign(raw.begin(), raw.end());
    for (std::size_t i = 0; i < raw.front().size(); ++i) {
        double total = 0.0;
        for (auto& p : map.planes) {
            p.pixels[i] += kWeightFloor;
            total += p.pixels[i];
        }
        for (auto& p : map.planes) p.pixels[i] /= total;
    }
    return map;
}

RgbImage mertens_fuse(std::span<const RgbImage> images, const MertensExponents& exponents,
                      int levels) {
    if (images.empty()) throw ConfigError("mertens_fuse: no input images");
    for (const auto& im : images)
        if (!im.same_dims(images.front())) throw InputError("mertens_fuse: image sizes differ");
    const int h = images.front().height;
    const int w = images.front().width;
    if (levels <= 0) levels = default_pyramid_levels(h, w);
    levels = clamp_pyramid_levels(h, w, levels);

    std::vector<PlanarImage> raw;
    raw.reserve(images.size());
    for (const auto& im : images) raw.push_back(quality_weights(im, exponents));
    const WeightMap weights = normalize_weights(raw);

    std::vector<Pyramid> weight_pyramids;
    for (const auto& plane : weights.planes) weight_pyramids.push_back(gaussian_pyramid(plane, levels));

    RgbImage out(h, w);
    double overshoot = 0.0;
    for (int c = 0; c < 3; ++c) {
        Pyramid blended;
        blended.kind = PyramidKind::Laplacian;
        for (std::size_t k = 0; k < images.size(); ++k) {
            const Pyramid lap = laplacian_pyramid(images[k].channel(c), levels);
            if (blended.levels.empty()) {
                blended.levels.resize(lap.levels.size());
                for (std::size_t l = 0; l < lap.levels.size(); ++l)
                    blended.levels[l] = PlanarImage(lap.levels[l].height, lap.levels[l].width);
            }
            for (std::size_t l = 0; l < lap.levels.size(); ++l) {
                const auto& wl = weight_pyramids[k].levels[l].pixels;
                auto& dst = blended.levels[l].pixels;
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += wl[i] * lap.levels[l].pixels[i];
            }
        }
        PlanarImage plane = collapse(blended);
        for (double& v : plane.pixels) {
            overshoot = std::max({overshoot, v - 1.0, -v});
            v = std::clamp(v, 0.0, 1.0);
        }
        out.set_channel(c, plane);
    }
    if (overshoot >= 0.1)
        log_info("mertens_fuse: pre-clip overshoot " + std::to_string(overshoot));
    return out;
}

}  // namespace deepfuse
