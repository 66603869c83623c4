#include "deepfuse/manifest.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "deepfuse/error.hpp"

namespace deepfuse {
namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::filesystem::path resolve(const std::string& field, const std::filesystem::path& base_dir) {
    std::filesystem::path p(field);
    return p.is_absolute() ? p : base_dir / p;
}

double parse_number(const std::string& text, int line_no) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw InputError("manifest line " + std::to_string(line_no) + ": bad number '" + text + "'");
    return value;
}

std::string format_number(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(std::istream& in, const std::filesystem::path& base_dir) {
    std::vector<ManifestEntry> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;

        std::vector<std::string> positional;
        ManifestEntry entry;
        std::stringstream fields(line);
        std::string field;
        while (std::getline(fields, field, ',')) {
            field = trim(field);
            const auto eq = field.find('=');
            if (eq == std::string::npos) {
                if (field.empty())
                    throw InputError("manifest line " + std::to_string(line_no) + ": empty field");
                positional.push_back(field);
                continue;
            }
            const std::string key = trim(field.substr(0, eq));
            const std::string value = trim(field.substr(eq + 1));
            if (key == "ev_under") {
                entry.ev_under = parse_number(value, line_no);
            } else if (key == "ev_over") {
                entry.ev_over = parse_number(value, line_no);
            } else {
                throw InputError("manifest line " + std::to_string(line_no) + ": unknown key '" + key + "'");
            }
        }
        if (positional.size() != 3 && positional.size() != 4) {
            throw InputError("manifest line " + std::to_string(line_no) +
                             ": expected 'under, over[, target], tag'");
        }
        entry.under = resolve(positional[0], base_dir);
        entry.over = resolve(positional[1], base_dir);
        if (positional.size() == 4) entry.target = resolve(positional[2], base_dir);
        entry.tag = positional.back();
        entries.push_back(std::move(entry));
    }
    return entries;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open manifest " + path.string());
    return parse_manifest(in, path.parent_path());
}

std::string format_manifest_line(const ManifestEntry& entry, const std::filesystem::path& base_dir) {
    auto rel = [&](const std::filesystem::path& p) {
        if (base_dir.empty()) return p.string();
        const auto r = p.lexically_relative(base_dir);
        if (r.empty() || *r.begin() == "..") return p.string();
        return r.string();
    };
    std::string line = rel(entry.under) + ", " + rel(entry.over);
    if (entry.target) line += ", " + rel(*entry.target);
    line += ", " + entry.tag;
    if (entry.ev_under) line += ", ev_under=" + format_number(*entry.ev_under);
    if (entry.ev_over) line += ", ev_over=" + format_number(*entry.ev_over);
    return line;
}

}  // namespace deepfuse
