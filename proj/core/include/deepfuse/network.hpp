#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "deepfuse/conv.hpp"
#include "deepfuse/image.hpp"
#include "deepfuse/merge.hpp"

namespace deepfuse {

/// Layer plan: C1 and C2 are the tied pre-fusion layers, C3..C5 reconstruct.
/// channels[i] is the output width of layer i+1; C5 always emits one channel.
struct ArchConfig {
    std::array<int, 5> kernels{5, 7, 7, 5, 5};
    std::array<int, 4> channels{16, 32, 32, 16};
    MergeMode merge = MergeMode::Add;
    std::uint64_t seed = 0;

    /// Full-size plan (the default-constructed config).
    static ArchConfig paper();
    /// Reduced plan sized for single-core training runs.
    static ArchConfig desk();
    /// Concatenation merge with a wider C3 to absorb the learned fusion weights.
    static ArchConfig concat();

    int receptive_field() const noexcept;
    void validate() const;

    friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

struct NetworkParams {
    ArchConfig arch;
    std::array<ConvLayer, 2> prefusion;       // C1, C2: one copy, applied to both inputs
    std::array<ConvLayer, 3> reconstruction;  // C3, C4, C5

    std::size_t parameter_count() const noexcept;

    /// Kernels then biases, layer by layer from C1 to C5.
    std::vector<double> flatten() const;
    void assign(std::span<const double> values);

    /// Zero-valued parameters with the same shapes (used as a gradient accumulator).
    NetworkParams zeros_like() const;

    friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Fan-in scaled normal kernels (He for ReLU layers), zero biases; deterministic in arch.seed.
NetworkParams init_network(const ArchConfig& arch);

/// Rounds every parameter to the nearest float32 so checkpoints round-trip exactly.
void round_to_float32(NetworkParams& params);

/// Content hash of the architecture and parameter bits.
std::uint64_t fingerprint(const NetworkParams& params);

struct ForwardCache {
    std::array<Tensor3, 2> inputs;
    std::array<Tensor3, 2> c1;
    std::array<Tensor3, 2> c2;
    Tensor3 merged;
    Tensor3 c3;
    Tensor3 c4;
    Tensor3 output;
    std::uint64_t params_fingerprint = 0;
};

struct ForwardResult {
    PlanarImage fused;  // unclamped network output
    ForwardCache cache;
};

ForwardResult forward(const NetworkParams& params, const PlanarImage& first,
                      const PlanarImage& second);

/// Output only; skips retaining the activation cache.
PlanarImage infer(const NetworkParams& params, const PlanarImage& first,
                  const PlanarImage& second);

/// Gradients laid out like `params`. Tied layers receive the sum of both streams.
/// Throws UsageError when `cache` was produced with different parameters.
NetworkParams backward(const NetworkParams& params, const ForwardCache& cache,
                       const PlanarImage& output_grad);

/// params += scale * grads, elementwise.
void accumulate(NetworkParams& target, const NetworkParams& grads, double scale = 1.0);

}  // namespace deepfuse
