#include "deepfuse/exposure.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "deepfuse/error.hpp"

namespace deepfuse {
namespace {

// Smoothly interpolated lattice noise in [0, 1], summed over octaves.
PlanarImage value_noise(int height, int width, double cell, int octaves, std::mt19937_64& rng) {
    PlanarImage out(height, width);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double amplitude = 1.0;
    double total_amplitude = 0.0;
    for (int o = 0; o < octaves; ++o) {
        const int gh = static_cast<int>(height / cell) + 2;
        const int gw = static_cast<int>(width / cell) + 2;
        std::vector<double> lattice(static_cast<std::size_t>(gh) * gw);
        for (double& v : lattice) v = uni(rng);
        for (int y = 0; y < height; ++y) {
            const double fy = y / cell;
            const int iy = static_cast<int>(fy);
            double ty = fy - iy;
            ty = ty * ty * (3.0 - 2.0 * ty);
            for (int x = 0; x < width; ++x) {
                const double fx = x / cell;
                const int ix = static_cast<int>(fx);
                double tx = fx - ix;
                tx = tx * tx * (3.0 - 2.0 * tx);
                auto at = [&](int yy, int xx) { return lattice[static_cast<std::size_t>(yy) * gw + xx]; };
                const double top = at(iy, ix) * (1.0 - tx) + at(iy, ix + 1) * tx;
                const double bottom = at(iy + 1, ix) * (1.0 - tx) + at(iy + 1, ix + 1) * tx;
                out.at(y, x) += amplitude * (top * (1.0 - ty) + bottom * ty);
            }
        }
        total_amplitude += amplitude;
        amplitude *= 0.5;
        cell = std::max(1.5, cell * 0.5);
    }
    for (double& v : out.pixels) v /= total_amplitude;
    return out;
}

}  // namespace

RgbImage apply_exposure(const RgbImage& base, double ev, double gamma) {
    if (!(gamma > 0.0)) throw ConfigError("apply_exposure: gamma must be positive");
    if (ev == 0.0) return base;
    const double gain = std::exp2(ev);
    RgbImage out = base;
    for (double& v : out.data) {
        const double linear = std::pow(std::clamp(v, 0.0, 1.0), gamma) * gain;
        v = std::pow(std::clamp(linear, 0.0, 1.0), 1.0 / gamma);
    }
    return out;
}

ExposurePair synthesize_exposure_pair(const RgbImage& base, double ev_low, double ev_high,
                                      double gamma) {
    if (ev_low > ev_high) throw ConfigError("synthesize_exposure_pair: ev_low exceeds ev_high");
    return ExposurePair{apply_exposure(base, ev_low, gamma), apply_exposure(base, ev_high, gamma),
                        ev_low, ev_high};
}

RgbImage synthesize_scene(int height, int width, std::uint64_t seed) {
    if (height < 1 || width < 1) throw ConfigError("synthesize_scene: empty size");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double scale = std::min(height, width);

    // Linear radiance, later gamma-encoded into [0, 1].
    std::array<PlanarImage, 3> radiance{PlanarImage(height, width), PlanarImage(height, width),
                                        PlanarImage(height, width)};
    const PlanarImage clouds = value_noise(height, width, scale / 4.0, 4, rng);
    const PlanarImage ground = value_noise(height, width, scale / 10.0, 5, rng);
    const PlanarImage grain = value_noise(height, width, 3.0, 2, rng);

    const double horizon = height * (0.25 + 0.3 * uni(rng));
    const std::array<double, 3> sky_tint{0.75 + 0.1 * uni(rng), 0.85 + 0.1 * uni(rng), 1.0};
    const std::array<double, 3> ground_tint{0.6 + 0.4 * uni(rng), 0.5 + 0.4 * uni(rng), 0.4 + 0.3 * uni(rng)};
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v;
                if (y < horizon) {
                    const double t = y / horizon;
                    v = sky_tint[c] * (0.45 + 0.35 * t + 0.35 * clouds.at(y, x));
                } else {
                    const double depth = (y - horizon) / (height - horizon + 1.0);
                    v = ground_tint[c] * (0.02 + 0.2 * ground.at(y, x) * ground.at(y, x) +
                                          0.05 * grain.at(y, x)) * (1.0 - 0.6 * depth);
                }
                radiance[c].at(y, x) = v;
            }
        }
    }

    // Buildings: textured blocks, some in deep shade, with lit windows.
    const int blocks = 3 + static_cast<int>(uni(rng) * 4);
    for (int b = 0; b < blocks; ++b) {
        const int bw = static_cast<int>(width * (0.08 + 0.2 * uni(rng)));
        const int bh = static_cast<int>(height * (0.2 + 0.45 * uni(rng)));
        const int x0 = static_cast<int>((width - bw) * uni(rng));
        const int y1 = static_cast<int>(horizon + (height - horizon) * 0.3 * uni(rng));
        const int y0 = std::max(0, y1 - bh);
        const double wall = 0.01 + 0.12 * uni(rng);
        const std::array<double, 3> tint{0.6 + 0.4 * uni(rng), 0.6 + 0.4 * uni(rng), 0.6 + 0.4 * uni(rng)};
        const int pitch = 6 + static_cast<int>(uni(rng) * 8);
        const double lit = 0.4 + 0.6 * uni(rng);
        for (int y = y0; y < std::min(height, y1); ++y) {
            for (int x = x0; x < std::min(width, x0 + bw); ++x) {
                const bool window = (y - y0) % pitch > 1 && (y - y0) % pitch < pitch - 2 &&
                                    (x - x0) % pitch > 1 && (x - x0) % pitch < pitch - 2;
                const bool on = window && grain.at((y / pitch * pitch) % height, (x / pitch * pitch) % width) < lit;
                for (int c = 0; c < 3; ++c) {
                    const double tex = 0.6 + 0.8 * grain.at(y, x);
                    radiance[c].at(y, x) = on ? (0.7 + 0.4 * grain.at(y, x)) * (c == 2 ? 0.7 : 1.0)
                                              : wall * tint[c] * tex;
                }
            }
        }
    }

    // Emitters: bright discs with a soft halo and inner texture.
    const int lamps = 2 + static_cast<int>(uni(rng) * 4);
    for (int l = 0; l < lamps; ++l) {
        const double cy = height * uni(rng);
        const double cx = width * uni(rng);
        const double r = scale * (0.03 + 0.06 * uni(rng));
        const std::array<double, 3> tint{1.0, 0.75 + 0.25 * uni(rng), 0.4 + 0.5 * uni(rng)};
        const int ylo = std::max(0, static_cast<int>(cy - 4 * r));
        const int yhi = std::min(height, static_cast<int>(cy + 4 * r) + 1);
        const int xlo = std::max(0, static_cast<int>(cx - 4 * r));
        const int xhi = std::min(width, static_cast<int>(cx + 4 * r) + 1);
        for (int y = ylo; y < yhi; ++y) {
            for (int x = xlo; x < xhi; ++x) {
                const double d = std::hypot(y - cy, x - cx) / r;
                const double halo = 0.5 * std::exp(-d * d / 4.0);
                const double core = d < 1.0 ? 0.6 + 0.4 * grain.at(y, x) : 0.0;
                for (int c = 0; c < 3; ++c) radiance[c].at(y, x) += tint[c] * (core + halo);
            }
        }
    }

    RgbImage out(height, width);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < out.pixel_count(); ++i) {
            out.data[3 * i + c] = std::pow(std::clamp(radiance[c].pixels[i], 0.0, 1.0), 1.0 / 2.2);
        }
    }
    return out;
}

}  // namespace deepfuse
