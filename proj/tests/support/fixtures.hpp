#pragma once

// Shared helpers for the test suites: seeded random data, reference implementations,
// and small synthetic datasets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "deepfuse/color.hpp"
#include "deepfuse/conv.hpp"
#include "deepfuse/dataset.hpp"
#include "deepfuse/exposure.hpp"
#include "deepfuse/image.hpp"
#include "deepfuse/log.hpp"
#include "deepfuse/tensor.hpp"

namespace fixtures {

inline std::vector<double> uniform(std::size_t n, double lo, double hi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = d(rng);
    return v;
}

inline deepfuse::Tensor3 random_tensor(int h, int w, int c, std::uint64_t seed, double lo = -1.0,
                                       double hi = 1.0) {
    deepfuse::Tensor3 t(h, w, c);
    t.values = uniform(t.size(), lo, hi, seed);
    return t;
}

inline deepfuse::PlanarImage random_image(int h, int w, std::uint64_t seed, double lo = 0.0,
                                          double hi = 1.0) {
    deepfuse::PlanarImage img(h, w);
    img.pixels = uniform(img.size(), lo, hi, seed);
    return img;
}

inline deepfuse::RgbImage random_rgb(int h, int w, std::uint64_t seed) {
    deepfuse::RgbImage img(h, w);
    img.data = uniform(img.data.size(), 0.0, 1.0, seed);
    return img;
}

inline deepfuse::ConvLayer random_layer(int kh, int kw, int cin, int cout, deepfuse::Activation act,
                                        std::uint64_t seed) {
    deepfuse::ConvLayer layer = deepfuse::ConvLayer::zeros(kh, kw, cin, cout, act);
    layer.kernel = uniform(layer.kernel.size(), -0.5, 0.5, seed);
    layer.bias = uniform(layer.bias.size(), -0.2, 0.2, seed + 1);
    return layer;
}

// Direct loop over output pixel, output channel, kernel tap and input channel.
inline deepfuse::Tensor3 naive_conv(const deepfuse::Tensor3& in, const deepfuse::ConvLayer& layer) {
    deepfuse::Tensor3 out(in.height, in.width, layer.out_channels);
    const int py = layer.kernel_h / 2;
    const int px = layer.kernel_w / 2;
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x)
            for (int co = 0; co < layer.out_channels; ++co) {
                double acc = layer.bias[co];
                for (int ky = 0; ky < layer.kernel_h; ++ky)
                    for (int kx = 0; kx < layer.kernel_w; ++kx) {
                        const int sy = y + ky - py;
                        const int sx = x + kx - px;
                        if (sy < 0 || sy >= in.height || sx < 0 || sx >= in.width) continue;
                        for (int ci = 0; ci < layer.in_channels; ++ci)
                            acc += layer.kernel[layer.kernel_index(ky, kx, ci, co)] * in.at(sy, sx, ci);
                    }
                if (layer.activation == deepfuse::Activation::ReLU) acc = std::max(0.0, acc);
                out.at(y, x, co) = acc;
            }
    return out;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Luminance pairs from procedural scenes at +-2 EV.
inline std::vector<deepfuse::LumaPair> scene_pairs(int count, int size, std::uint64_t first_seed) {
    std::vector<deepfuse::LumaPair> pairs;
    for (int i = 0; i < count; ++i) {
        const deepfuse::RgbImage scene = deepfuse::synthesize_scene(size, size, first_seed + i);
        const deepfuse::ExposurePair ep = deepfuse::synthesize_exposure_pair(scene, -2.0, 2.0);
        pairs.push_back({deepfuse::luminance(ep.under), deepfuse::luminance(ep.over), std::nullopt,
                         "scene" + std::to_string(first_seed + i)});
    }
    return pairs;
}

// Collects log output for the lifetime of the object.
struct CapturedLog {
    std::vector<std::string> warnings;
    std::vector<std::string> infos;
    deepfuse::ScopedLogSink guard{[this](deepfuse::LogLevel level, std::string_view msg) {
        (level == deepfuse::LogLevel::Warning ? warnings : infos).emplace_back(msg);
    }};
};

// Unique scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) {
        path = std::filesystem::temp_directory_path() /
               (name + "-" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& leaf) const { return path / leaf; }
};

}  // namespace fixtures
