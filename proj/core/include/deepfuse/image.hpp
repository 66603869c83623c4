#pragma once

#include <cstddef>
#include <vector>

#include "deepfuse/tensor.hpp"

namespace deepfuse {

/// Single-channel raster of normalized intensities, row-major.
struct PlanarImage {
    int height = 0;
    int width = 0;
    std::vector<double> pixels;

    PlanarImage() = default;
    PlanarImage(int h, int w, double fill = 0.0);

    std::size_t size() const noexcept { return pixels.size(); }
    bool empty() const noexcept { return pixels.empty(); }

    double& at(int y, int x) noexcept { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const noexcept {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }

    bool same_dims(const PlanarImage& other) const noexcept {
        return height == other.height && width == other.width;
    }

    friend bool operator==(const PlanarImage&, const PlanarImage&) = default;
};

/// Interleaved RGB raster with channels in [0, 1].
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    RgbImage() = default;
    RgbImage(int h, int w, double fill = 0.0);

    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }

    double& at(int y, int x, int c) noexcept {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    double at(int y, int x, int c) const noexcept {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }

    bool same_dims(const RgbImage& other) const noexcept {
        return height == other.height && width == other.width;
    }

    PlanarImage channel(int c) const;
    void set_channel(int c, const PlanarImage& plane);

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

Tensor3 to_tensor(const PlanarImage& image);
PlanarImage to_planar(const Tensor3& tensor);  // requires channels == 1

PlanarImage crop(const PlanarImage& image, int y0, int x0, int h, int w);
PlanarImage clamp01(PlanarImage image);
double mean(const PlanarImage& image) noexcept;

/// 2x2 box average; odd trailing rows/columns are dropped.
PlanarImage downsample2(const PlanarImage& image);
/// Adjoint of downsample2: spreads each coarse value over its 2x2 block with weight 1/4.
PlanarImage downsample2_adjoint(const PlanarImage& coarse, int fine_height, int fine_width);

}  // namespace deepfuse
