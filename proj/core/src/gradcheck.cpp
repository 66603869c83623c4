#include "deepfuse/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "deepfuse/error.hpp"

namespace deepfuse {

double relative_error(double analytic, double numeric) noexcept {
    return std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-12);
}

GradCheckResult finite_diff_check(const ScalarLoss& loss, std::span<const double> params,
                                  std::span<const double> analytic,
                                  const GradCheckOptions& options) {
    if (params.size() != analytic.size())
        throw ConfigError("finite_diff_check: gradient size differs from parameter size");
    if (!(options.epsilon > 0.0)) throw ConfigError("finite_diff_check: epsilon must be positive");

    std::vector<std::size_t> candidates;
    candidates.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!options.exclude || !options.exclude(i)) candidates.push_back(i);
    }
    GradCheckResult result;
    result.skipped = params.size() - candidates.size();
    if (options.max_samples > 0 && options.max_samples < candidates.size()) {
        std::mt19937_64 rng(options.seed);
        std::shuffle(candidates.begin(), candidates.end(), rng);
        candidates.resize(options.max_samples);
        std::sort(candidates.begin(), candidates.end());
    }

    double floor = 0.0;
    if (options.relative_floor > 0.0) {
        for (double a : analytic) floor = std::max(floor, std::abs(a));
        floor *= options.relative_floor;
    }

    std::vector<double> point(params.begin(), params.end());
    const double base = options.kink_tolerance > 0.0 ? loss(point) : 0.0;
    for (const std::size_t i : candidates) {
        const double x = params[i];
        const double up = x + options.epsilon;
        const double down = x - options.epsilon;
        point[i] = up;
        const double f_up = loss(point);
        point[i] = down;
        const double f_down = loss(point);
        point[i] = x;

        if (options.kink_tolerance > 0.0) {
            const double forward = (f_up - base) / (up - x);
            const double backward = (base - f_down) / (x - down);
            if (std::abs(forward - backward) >
                options.kink_tolerance * (std::abs(forward) + std::abs(backward)) + 1e-10) {
                ++result.skipped;
                continue;
            }
        }

        const double numeric = (f_up - f_down) / (up - down);
        const double scale = std::abs(analytic[i]) + std::abs(numeric);
        double err = relative_error(analytic[i], numeric);
        if (scale < floor) {
            err = std::abs(analytic[i] - numeric) / floor;
            ++result.floored;
        }
        ++result.checked;
        if (result.checked == 1 || err > result.max_relative_error) {
            result.max_relative_error = err;
            result.worst_index = i;
            result.worst_analytic = analytic[i];
            result.worst_numeric = numeric;
        }
    }
    return result;
}

}  // namespace deepfuse
