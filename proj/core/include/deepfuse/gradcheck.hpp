#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

namespace deepfuse {

using ScalarLoss = std::function<double(std::span<const double>)>;

struct GradCheckOptions {
    double epsilon = 1e-4;
    // Number of coordinates to sample; 0 checks every coordinate.
    std::size_t max_samples = 0;
    std::uint64_t seed = 0;
    // Coordinates for which this returns true are never sampled (nondifferentiable points).
    std::function<bool(std::size_t)> exclude;
    // When > 0, coordinates whose one-sided slopes disagree by more than this relative
    // amount straddle a kink inside [x - eps, x + eps] and are skipped.
    double kink_tolerance = 0.0;
    // When > 0, the error denominator is at least this fraction of max |analytic|. Central
    // differences carry roundoff near ulp(loss) / eps, so coordinates far below the gradient's
    // scale cannot be resolved relatively; they are then judged against the floor instead.
    double relative_floor = 0.0;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
    std::size_t floored = 0;  // checked coordinates whose denominator was the floor
};

/// |a - b| / (|a| + |b| + 1e-12)
double relative_error(double analytic, double numeric) noexcept;

/// Compares `analytic` against central differences of `loss` around `params`.
GradCheckResult finite_diff_check(const ScalarLoss& loss, std::span<const double> params,
                                  std::span<const double> analytic,
                                  const GradCheckOptions& options = {});

}  // namespace deepfuse
