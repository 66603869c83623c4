#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace deepfuse {

/// Dense H x W x C feature map stored row-major in (y, x, c) order.
struct Tensor3 {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> values;

    Tensor3() = default;
    Tensor3(int h, int w, int c, double fill = 0.0);

    std::size_t size() const noexcept { return values.size(); }
    std::size_t pixels() const noexcept {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    }

    double& at(int y, int x, int c) noexcept {
        return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const noexcept {
        return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool same_shape(const Tensor3& other) const noexcept {
        return height == other.height && width == other.width && channels == other.channels;
    }

    friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

bool all_finite(std::span<const double> values) noexcept;

}  // namespace deepfuse
