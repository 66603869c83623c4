#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deepfuse/image.hpp"

namespace deepfuse {

/// A registered exposure pair reduced to luminance, with an optional supervised target.
struct LumaPair {
    PlanarImage under;
    PlanarImage over;
    std::optional<PlanarImage> target;
    std::string tag;
};

struct PatchPair {
    PlanarImage under;
    PlanarImage over;
    std::optional<PlanarImage> target;
    int source_id = 0;
    int origin_y = 0;
    int origin_x = 0;
};

/// Seeded uniform crops. Crops flat in both exposures are rejected and redrawn; pairs
/// smaller than the patch are skipped with a warning. Throws ConfigError when patches are
/// requested but no pair can supply them.
std::vector<PatchPair> build_patch_dataset(std::span<const LumaPair> pairs, int patch_size,
                                           std::size_t count, std::uint64_t seed);

}  // namespace deepfuse
