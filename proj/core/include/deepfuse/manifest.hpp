#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace deepfuse {

// One record: `under, over[, target], tag[, ev_under=<x>][, ev_over=<x>]`.
// Relative paths resolve against the manifest's directory. '#' starts a comment.
struct ManifestEntry {
    std::filesystem::path under;
    std::filesystem::path over;
    std::optional<std::filesystem::path> target;
    std::string tag;
    std::optional<double> ev_under;
    std::optional<double> ev_over;
};

/// Throws InputError naming the offending line.
std::vector<ManifestEntry> parse_manifest(std::istream& in, const std::filesystem::path& base_dir);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Paths are written relative to base_dir when they live beneath it.
std::string format_manifest_line(const ManifestEntry& entry, const std::filesystem::path& base_dir);

}  // namespace deepfuse
