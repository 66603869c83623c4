#include "deepfuse/merge.hpp"

#include <algorithm>

#include "deepfuse/error.hpp"

namespace deepfuse {

std::string_view to_string(MergeMode mode) noexcept {
    switch (mode) {
        case MergeMode::Add: return "add";
        case MergeMode::Mean: return "mean";
        case MergeMode::Max: return "max";
        case MergeMode::Product: return "product";
        case MergeMode::Concat: return "concat";
    }
    return "unknown";
}

std::optional<MergeMode> parse_merge_mode(std::string_view name) noexcept {
    for (MergeMode m : {MergeMode::Add, MergeMode::Mean, MergeMode::Max, MergeMode::Product,
                        MergeMode::Concat}) {
        if (name == to_string(m)) return m;
    }
    return std::nullopt;
}

Tensor3 merge_forward(const Tensor3& a, const Tensor3& b, MergeMode mode) {
    if (!a.same_shape(b)) throw ConfigError("merge_forward: operand shapes differ");
    if (mode == MergeMode::Concat) {
        Tensor3 out(a.height, a.width, a.channels * 2);
        const std::size_t c = static_cast<std::size_t>(a.channels);
        for (std::size_t p = 0; p < a.pixels(); ++p) {
            std::copy_n(&a.values[p * c], c, &out.values[p * 2 * c]);
            std::copy_n(&b.values[p * c], c, &out.values[p * 2 * c + c]);
        }
        return out;
    }
    Tensor3 out(a.height, a.width, a.channels);
    const auto n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a.values[i];
        const double y = b.values[i];
        switch (mode) {
            case MergeMode::Add: out.values[i] = x + y; break;
            case MergeMode::Mean: out.values[i] = 0.5 * (x + y); break;
            case MergeMode::Max: out.values[i] = x >= y ? x : y; break;
            case MergeMode::Product: out.values[i] = x * y; break;
            case MergeMode::Concat: break;
        }
    }
    return out;
}

std::pair<Tensor3, Tensor3> merge_backward(const Tensor3& a, const Tensor3& b, MergeMode mode,
                                           const Tensor3& upstream_grad) {
    if (!a.same_shape(b)) throw ConfigError("merge_backward: operand shapes differ");
    const int out_channels = mode == MergeMode::Concat ? a.channels * 2 : a.channels;
    if (upstream_grad.height != a.height || upstream_grad.width != a.width ||
        upstream_grad.channels != out_channels) {
        throw ConfigError("merge_backward: upstream gradient shape does not match merge output");
    }
    Tensor3 ga(a.height, a.width, a.channels);
    Tensor3 gb(a.height, a.width, a.channels);
    if (mode == MergeMode::Concat) {
        const std::size_t c = static_cast<std::size_t>(a.channels);
        for (std::size_t p = 0; p < a.pixels(); ++p) {
            std::copy_n(&upstream_grad.values[p * 2 * c], c, &ga.values[p * c]);
            std::copy_n(&upstream_grad.values[p * 2 * c + c], c, &gb.values[p * c]);
        }
        return {std::move(ga), std::move(gb)};
    }
    const auto n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double g = upstream_grad.values[i];
        switch (mode) {
            case MergeMode::Add:
                ga.values[i] = g;
                gb.values[i] = g;
                break;
            case MergeMode::Mean:
                ga.values[i] = 0.5 * g;
                gb.values[i] = 0.5 * g;
                break;
            case MergeMode::Max:
                if (a.values[i] >= b.values[i]) ga.values[i] = g;
                else gb.values[i] = g;
                break;
            case MergeMode::Product:
                ga.values[i] = g * b.values[i];
                gb.values[i] = g * a.values[i];
                break;
            case MergeMode::Concat: break;
        }
    }
    return {std::move(ga), std::move(gb)};
}

}  // namespace deepfuse
