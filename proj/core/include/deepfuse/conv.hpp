#pragma once

#include <cstddef>
#include <vector>

#include "deepfuse/tensor.hpp"

namespace deepfuse {

enum class Activation { ReLU, Linear };

/// Stride-1 "same"-padded 2-D convolution layer (cross-correlation convention).
/// Kernel layout is [kh][kw][cin][cout], row-major.
struct ConvLayer {
    int kernel_h = 0;
    int kernel_w = 0;
    int in_channels = 0;
    int out_channels = 0;
    std::vector<double> kernel;
    std::vector<double> bias;
    Activation activation = Activation::ReLU;

    static ConvLayer zeros(int kh, int kw, int cin, int cout, Activation act);

    std::size_t kernel_size() const noexcept {
        return static_cast<std::size_t>(kernel_h) * kernel_w * in_channels * out_channels;
    }
    std::size_t parameter_count() const noexcept { return kernel_size() + bias.size(); }

    std::size_t kernel_index(int ky, int kx, int ci, int co) const noexcept {
        return ((static_cast<std::size_t>(ky) * kernel_w + kx) * in_channels + ci) * out_channels +
               co;
    }

    // Throws ConfigError on even kernels, non-positive channels, or size mismatches.
    void validate() const;

    friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

struct ConvGrads {
    Tensor3 input;  // empty when not requested
    std::vector<double> kernel;
    std::vector<double> bias;
};

Tensor3 conv2d_forward(const Tensor3& input, const ConvLayer& layer);

// `output` is the forward result for (input, layer); its sign gates the ReLU gradient.
ConvGrads conv2d_backward(const Tensor3& input, const ConvLayer& layer, const Tensor3& output,
                          const Tensor3& upstream_grad, bool need_input_grad = true);

// Convenience overload that recomputes the forward pass.
ConvGrads conv2d_backward(const Tensor3& input, const ConvLayer& layer,
                          const Tensor3& upstream_grad);

}  // namespace deepfuse
