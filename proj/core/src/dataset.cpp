#include "deepfuse/dataset.hpp"

#include <algorithm>
#include <random>

#include "deepfuse/error.hpp"
#include "deepfuse/log.hpp"

namespace deepfuse {
namespace {

bool is_flat(const PlanarImage& patch) {
    const auto [lo, hi] = std::minmax_element(patch.pixels.begin(), patch.pixels.end());
    return *hi - *lo <= 1e-6;
}

}  // namespace

std::vector<PatchPair> build_patch_dataset(std::span<const LumaPair> pairs, int patch_size,
                                           std::size_t count, std::uint64_t seed) {
    if (patch_size < 1) throw ConfigError("build_patch_dataset: patch size must be positive");
    std::vector<PatchPair> dataset;
    if (count == 0) return dataset;

    std::vector<int> eligible;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const LumaPair& p = pairs[i];
        if (!p.under.same_dims(p.over) || (p.target && !p.target->same_dims(p.under)))
            throw InputError("build_patch_dataset: pair '" + p.tag + "' has mismatched dimensions");
        if (p.under.height < patch_size || p.under.width < patch_size) {
            log_warning("build_patch_dataset: skipping '" + p.tag + "' (" +
                        std::to_string(p.under.height) + "x" + std::to_string(p.under.width) +
                        " is smaller than the " + std::to_string(patch_size) + "-pixel patch)");
            continue;
        }
        eligible.push_back(static_cast<int>(i));
    }
    if (eligible.empty()) throw ConfigError("build_patch_dataset: no image pair can supply patches");

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
    const std::size_t max_attempts = 50 * count + 1000;
    std::size_t attempts = 0;
    dataset.reserve(count);
    while (dataset.size() < count) {
        if (++attempts > max_attempts)
            throw ConfigError("build_patch_dataset: too few structured regions to sample from");
        const int id = eligible[pick(rng)];
        const LumaPair& src = pairs[static_cast<std::size_t>(id)];
        std::uniform_int_distribution<int> ys(0, src.under.height - patch_size);
        std::uniform_int_distribution<int> xs(0, src.under.width - patch_size);
        const int y0 = ys(rng);
        const int x0 = xs(rng);
        PatchPair patch;
        patch.under = crop(src.under, y0, x0, patch_size, patch_size);
        patch.over = crop(src.over, y0, x0, patch_size, patch_size);
        if (is_flat(patch.under) && is_flat(patch.over)) continue;
        if (src.target) patch.target = crop(*src.target, y0, x0, patch_size, patch_size);
        patch.source_id = id;
        patch.origin_y = y0;
        patch.origin_x = x0;
        dataset.push_back(std::move(patch));
    }
    return dataset;
}

}  // namespace deepfuse
