#include "deepfuse/image.hpp"

#include <algorithm>
#include <numeric>

#include "deepfuse/error.hpp"

namespace deepfuse {

PlanarImage::PlanarImage(int h, int w, double fill) : height(h), width(w) {
    if (h < 0 || w < 0) throw ConfigError("PlanarImage: negative dimension");
    pixels.assign(static_cast<std::size_t>(h) * w, fill);
}

RgbImage::RgbImage(int h, int w, double fill) : height(h), width(w) {
    if (h < 0 || w < 0) throw ConfigError("RgbImage: negative dimension");
    data.assign(static_cast<std::size_t>(h) * w * 3, fill);
}

PlanarImage RgbImage::channel(int c) const {
    PlanarImage out(height, width);
    for (std::size_t i = 0; i < pixel_count(); ++i) out.pixels[i] = data[i * 3 + c];
    return out;
}

void RgbImage::set_channel(int c, const PlanarImage& plane) {
    if (plane.height != height || plane.width != width)
        throw ConfigError("RgbImage::set_channel: dimension mismatch");
    for (std::size_t i = 0; i < pixel_count(); ++i) data[i * 3 + c] = plane.pixels[i];
}

Tensor3 to_tensor(const PlanarImage& image) {
    Tensor3 t;
    t.height = image.height;
    t.width = image.width;
    t.channels = 1;
    t.values = image.pixels;
    return t;
}

PlanarImage to_planar(const Tensor3& tensor) {
    if (tensor.channels != 1) throw ConfigError("to_planar: tensor must have one channel");
    PlanarImage p;
    p.height = tensor.height;
    p.width = tensor.width;
    p.pixels = tensor.values;
    return p;
}

PlanarImage crop(const PlanarImage& image, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || h < 0 || w < 0 || y0 + h > image.height || x0 + w > image.width)
        throw ConfigError("crop: window outside image");
    PlanarImage out(h, w);
    for (int y = 0; y < h; ++y) {
        const double* src = &image.pixels[static_cast<std::size_t>(y0 + y) * image.width + x0];
        std::copy(src, src + w, &out.pixels[static_cast<std::size_t>(y) * w]);
    }
    return out;
}

PlanarImage clamp01(PlanarImage image) {
    for (double& v : image.pixels) v = std::clamp(v, 0.0, 1.0);
    return image;
}

double mean(const PlanarImage& image) noexcept {
    if (image.pixels.empty()) return 0.0;
    return std::accumulate(image.pixels.begin(), image.pixels.end(), 0.0) /
           static_cast<double>(image.pixels.size());
}

PlanarImage downsample2(const PlanarImage& image) {
    const int h = image.height / 2;
    const int w = image.width / 2;
    PlanarImage out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            out.at(y, x) = 0.25 * (image.at(2 * y, 2 * x) + image.at(2 * y, 2 * x + 1) +
                                   image.at(2 * y + 1, 2 * x) + image.at(2 * y + 1, 2 * x + 1));
        }
    }
    return out;
}

PlanarImage downsample2_adjoint(const PlanarImage& coarse, int fine_height, int fine_width) {
    if (coarse.height != fine_height / 2 || coarse.width != fine_width / 2)
        throw ConfigError("downsample2_adjoint: coarse dims do not match fine dims");
    PlanarImage out(fine_height, fine_width);
    for (int y = 0; y < coarse.height; ++y) {
        for (int x = 0; x < coarse.width; ++x) {
            const double g = 0.25 * coarse.at(y, x);
            out.at(2 * y, 2 * x) = g;
            out.at(2 * y, 2 * x + 1) = g;
            out.at(2 * y + 1, 2 * x) = g;
            out.at(2 * y + 1, 2 * x + 1) = g;
        }
    }
    return out;
}

}  // namespace deepfuse
