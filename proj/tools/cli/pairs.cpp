#include "cli/pairs.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "deepfuse/color.hpp"
#include "deepfuse/error.hpp"
#include "deepfuse/image_io.hpp"

namespace deepfuse::cli {
namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string dims(const RgbImage& img) {
    return std::to_string(img.height) + "x" + std::to_string(img.width);
}

}  // namespace

ExposurePair load_exposure_pair(const std::filesystem::path& under, const std::filesystem::path& over) {
    ExposurePair pair;
    pair.under = read_image(under);
    pair.over = read_image(over);
    if (!pair.under.same_dims(pair.over)) {
        throw InputError("exposures differ in size: " + under.string() + " is " + dims(pair.under) +
                         ", " + over.string() + " is " + dims(pair.over));
    }
    return pair;
}

std::vector<LumaPair> load_luma_pairs(const std::vector<ManifestEntry>& entries) {
    std::vector<LumaPair> pairs;
    pairs.reserve(entries.size());
    for (const ManifestEntry& e : entries) {
        const ExposurePair exposures = load_exposure_pair(e.under, e.over);
        LumaPair pair{luminance(exposures.under), luminance(exposures.over), std::nullopt, e.tag};
        if (e.target) {
            const RgbImage target = read_image(*e.target);
            if (!target.same_dims(exposures.under))
                throw InputError("target for '" + e.tag + "' differs in size from its exposures");
            pair.target = luminance(target);
        }
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

MefSsimResult score_files(const std::filesystem::path& under, const std::filesystem::path& over,
                          const std::filesystem::path& fused, const MefSsimConfig& config,
                          bool keep_map) {
    const ExposurePair pair = load_exposure_pair(under, over);
    const RgbImage result = read_image(fused);
    if (!result.same_dims(pair.under)) {
        throw InputError("fused image " + fused.string() + " is " + dims(result) +
                         ", exposures are " + dims(pair.under));
    }
    MefSsimResult r = mef_ssim(luminance(pair.under), luminance(pair.over), luminance(result), config);
    if (!keep_map) r.map = {};
    return r;
}

std::string format_score(const MefSsimResult& result) {
    std::string s = "score: " + fixed(result.score, 6) + "\n";
    for (std::size_t i = 0; i < result.scale_scores.size(); ++i)
        s += "scale " + std::to_string(i + 1) + ": " + fixed(result.scale_scores[i], 6) + "\n";
    return s;
}

CompareRow mean_row(const std::vector<CompareRow>& rows) {
    if (rows.empty()) throw UsageError("mean_row: no rows");
    CompareRow mean{"Mean", 0.0, 0.0};
    for (const CompareRow& r : rows) {
        mean.mertens += r.mertens;
        mean.deepfuse += r.deepfuse;
    }
    const double n = static_cast<double>(rows.size());
    mean.mertens /= n;
    mean.deepfuse /= n;
    return mean;
}

// The highest score in each row is bolded; ties at the printed precision bold both.
std::string compare_markdown(const std::vector<CompareRow>& rows) {
    std::ostringstream os;
    os << "| Sequence | Mertens | DF |\n|---|---|---|\n";
    auto cell = [](double v, double best) {
        const std::string text = fixed(v, 4);
        return text == fixed(best, 4) ? "**" + text + "**" : text;
    };
    auto emit = [&](const CompareRow& r) {
        const double best = std::max(r.mertens, r.deepfuse);
        os << "| " << r.sequence << " | " << cell(r.mertens, best) << " | " << cell(r.deepfuse, best) << " |\n";
    };
    for (const CompareRow& r : rows) emit(r);
    if (!rows.empty()) emit(mean_row(rows));
    return os.str();
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
    std::ostringstream os;
    os << "sequence,mertens,deepfuse\n";
    auto emit = [&](const CompareRow& r, const std::string& name) {
        os << name << ',' << fixed(r.mertens, 4) << ',' << fixed(r.deepfuse, 4) << '\n';
    };
    for (const CompareRow& r : rows) emit(r, r.sequence);
    if (!rows.empty()) emit(mean_row(rows), "mean");
    return os.str();
}

}  // namespace deepfuse::cli
