#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace deepfuse {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::int64_t step = 0;

    AdamState() = default;
    explicit AdamState(std::size_t parameter_count)
        : first_moment(parameter_count, 0.0), second_moment(parameter_count, 0.0) {}

    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update. Throws NumericError (leaving params and state
/// untouched) if any gradient is non-finite, ConfigError on size mismatch.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& config);

}  // namespace deepfuse
