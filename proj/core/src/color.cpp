#include "deepfuse/color.hpp"

#include <algorithm>

#include "deepfuse/error.hpp"

namespace deepfuse {

YCbCrImage rgb_to_ycbcr(const RgbImage& rgb) {
    YCbCrImage out{PlanarImage(rgb.height, rgb.width), PlanarImage(rgb.height, rgb.width),
                   PlanarImage(rgb.height, rgb.width)};
    for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
        const double r = rgb.data[3 * i];
        const double g = rgb.data[3 * i + 1];
        const double b = rgb.data[3 * i + 2];
        const double y = 0.299 * r + 0.587 * g + 0.114 * b;
        const double cb = kChromaNeutral + 255.0 * (b - y) / 1.772;
        const double cr = kChromaNeutral + 255.0 * (r - y) / 1.402;
        out.y.pixels[i] = std::clamp(y, 0.0, 1.0);
        out.cb.pixels[i] = std::clamp(cb, 0.0, 255.0);
        out.cr.pixels[i] = std::clamp(cr, 0.0, 255.0);
    }
    return out;
}

RgbImage ycbcr_to_rgb(const YCbCrImage& ycc) {
    if (!ycc.y.same_dims(ycc.cb) || !ycc.y.same_dims(ycc.cr))
        throw ConfigError("ycbcr_to_rgb: planes differ in size");
    RgbImage out(ycc.y.height, ycc.y.width);
    for (std::size_t i = 0; i < ycc.y.size(); ++i) {
        const double y = ycc.y.pixels[i];
        const double cb = (ycc.cb.pixels[i] - kChromaNeutral) / 255.0;
        const double cr = (ycc.cr.pixels[i] - kChromaNeutral) / 255.0;
        const double r = y + 1.402 * cr;
        const double b = y + 1.772 * cb;
        const double g = (y - 0.299 * r - 0.114 * b) / 0.587;
        out.data[3 * i] = std::clamp(r, 0.0, 1.0);
        out.data[3 * i + 1] = std::clamp(g, 0.0, 1.0);
        out.data[3 * i + 2] = std::clamp(b, 0.0, 1.0);
    }
    return out;
}

PlanarImage luminance(const RgbImage& rgb) {
    PlanarImage y(rgb.height, rgb.width);
    for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
        const double v = 0.299 * rgb.data[3 * i] + 0.587 * rgb.data[3 * i + 1] + 0.114 * rgb.data[3 * i + 2];
        y.pixels[i] = std::clamp(v, 0.0, 1.0);
    }
    return y;
}

}  // namespace deepfuse
