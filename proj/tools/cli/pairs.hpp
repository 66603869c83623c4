#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "deepfuse/dataset.hpp"
#include "deepfuse/exposure.hpp"
#include "deepfuse/manifest.hpp"
#include "deepfuse/mefssim.hpp"

namespace deepfuse::cli {

/// Reads an under/over pair; throws InputError when the dimensions differ.
ExposurePair load_exposure_pair(const std::filesystem::path& under, const std::filesystem::path& over);

/// Luminance training pairs for every manifest entry, targets included when listed.
std::vector<LumaPair> load_luma_pairs(const std::vector<ManifestEntry>& entries);

/// MEF-SSIM of an on-disk fused image against on-disk exposures (shared by fuse and score).
MefSsimResult score_files(const std::filesystem::path& under, const std::filesystem::path& over,
                          const std::filesystem::path& fused, const MefSsimConfig& config,
                          bool keep_map);

/// `score: x.xxxxxx` followed by one line per scale.
std::string format_score(const MefSsimResult& result);

/// Markdown and CSV renderings of the Mertens vs DeepFuse comparison grid.
struct CompareRow {
    std::string sequence;
    double mertens = 0.0;
    double deepfuse = 0.0;
};
/// Arithmetic mean of both columns, labelled "Mean"; rows must be nonempty.
CompareRow mean_row(const std::vector<CompareRow>& rows);
std::string compare_markdown(const std::vector<CompareRow>& rows);
std::string compare_csv(const std::vector<CompareRow>& rows);

}  // namespace deepfuse::cli
