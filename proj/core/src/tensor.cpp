#include "deepfuse/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "deepfuse/error.hpp"

namespace deepfuse {

Tensor3::Tensor3(int h, int w, int c, double fill) : height(h), width(w), channels(c) {
    if (h < 0 || w < 0 || c < 0) throw ConfigError("Tensor3: negative dimension");
    values.assign(static_cast<std::size_t>(h) * w * c, fill);
}

bool all_finite(std::span<const double> values) noexcept {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace deepfuse
