#include "deepfuse/pyramid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "deepfuse/error.hpp"
#include "deepfuse/log.hpp"

namespace deepfuse {
namespace {

constexpr std::array<double, 5> kBinomial{1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

int reflect101(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

PlanarImage blur(const PlanarImage& image, double gain) {
    PlanarImage tmp(image.height, image.width);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            double acc = 0.0;
            for (int k = -2; k <= 2; ++k) acc += kBinomial[k + 2] * image.at(y, reflect101(x + k, image.width));
            tmp.at(y, x) = acc;
        }
    }
    PlanarImage out(image.height, image.width);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            double acc = 0.0;
            for (int k = -2; k <= 2; ++k) acc += kBinomial[k + 2] * tmp.at(reflect101(y + k, image.height), x);
            out.at(y, x) = gain * acc;
        }
    }
    return out;
}

}  // namespace

PlanarImage pyr_down(const PlanarImage& image) {
    const PlanarImage blurred = blur(image, 1.0);
    PlanarImage out((image.height + 1) / 2, (image.width + 1) / 2);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) out.at(y, x) = blurred.at(2 * y, 2 * x);
    return out;
}

PlanarImage pyr_up(const PlanarImage& image, int height, int width) {
    if ((height + 1) / 2 != image.height || (width + 1) / 2 != image.width)
        throw ConfigError("pyr_up: target size is not the parent of this level");
    PlanarImage sparse(height, width);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) sparse.at(2 * y, 2 * x) = image.at(y, x);
    return blur(sparse, 4.0);
}

int default_pyramid_levels(int height, int width) noexcept {
    const int m = std::min(height, width);
    if (m < 1) return 1;
    const int levels = static_cast<int>(std::floor(std::log2(static_cast<double>(m)))) - 2;
    return std::max(1, levels);
}

int clamp_pyramid_levels(int height, int width, int requested) {
    if (requested < 1) throw ConfigError("pyramid: levels must be >= 1");
    const int m = std::min(height, width);
    int levels = requested;
    while (levels > 1 && m < (1 << (levels - 1))) --levels;
    if (levels != requested) {
        log_warning("pyramid: " + std::to_string(height) + "x" + std::to_string(width) +
                    " supports " + std::to_string(levels) + " of " + std::to_string(requested) +
                    " levels");
    }
    return levels;
}

Pyramid gaussian_pyramid(const PlanarImage& image, int levels) {
    if (image.empty()) throw ConfigError("gaussian_pyramid: empty image");
    levels = clamp_pyramid_levels(image.height, image.width, levels);
    Pyramid p;
    p.kind = PyramidKind::Gaussian;
    p.levels.push_back(image);
    for (int l = 1; l < levels; ++l) p.levels.push_back(pyr_down(p.levels.back()));
    return p;
}

Pyramid laplacian_pyramid(const PlanarImage& image, int levels) {
    Pyramid g = gaussian_pyramid(image, levels);
    Pyramid p;
    p.kind = PyramidKind::Laplacian;
    p.levels.resize(g.levels.size());
    for (std::size_t l = 0; l + 1 < g.levels.size(); ++l) {
        const PlanarImage up = pyr_up(g.levels[l + 1], g.levels[l].height, g.levels[l].width);
        p.levels[l] = g.levels[l];
        for (std::size_t i = 0; i < up.size(); ++i) p.levels[l].pixels[i] -= up.pixels[i];
    }
    p.levels.back() = std::move(g.levels.back());
    return p;
}

PlanarImage collapse(const Pyramid& pyramid) {
    if (pyramid.levels.empty()) throw ConfigError("collapse: empty pyramid");
    if (pyramid.kind == PyramidKind::Gaussian) return pyramid.levels.front();
    PlanarImage acc = pyramid.levels.back();
    for (std::size_t l = pyramid.levels.size() - 1; l-- > 0;) {
        const PlanarImage& band = pyramid.levels[l];
        PlanarImage up = pyr_up(acc, band.height, band.width);
        for (std::size_t i = 0; i < up.size(); ++i) up.pixels[i] += band.pixels[i];
        acc = std::move(up);
    }
    return acc;
}

}  // namespace deepfuse
