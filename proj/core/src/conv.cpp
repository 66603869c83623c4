#include "deepfuse/conv.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <string>

#include "deepfuse/error.hpp"

namespace deepfuse {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

constexpr std::size_t kBandBudget = std::size_t{1} << 20;  // doubles per im2col band

int band_rows(const Tensor3& input, const ConvLayer& layer) {
    const std::size_t per_row = static_cast<std::size_t>(input.width) * layer.kernel_h *
                                layer.kernel_w * layer.in_channels;
    return static_cast<int>(std::max<std::size_t>(1, kBandBudget / std::max<std::size_t>(1, per_row)));
}

// Fills cols with the receptive fields of rows [y0, y1); out-of-image taps are zero.
void im2col(const Tensor3& input, const ConvLayer& layer, int y0, int y1, RowMatrix& cols) {
    const int ph = layer.kernel_h / 2;
    const int pw = layer.kernel_w / 2;
    const int cin = layer.in_channels;
    const Eigen::Index k = static_cast<Eigen::Index>(layer.kernel_h) * layer.kernel_w * cin;
    cols.resize(static_cast<Eigen::Index>(y1 - y0) * input.width, k);
    for (int y = y0; y < y1; ++y) {
        for (int x = 0; x < input.width; ++x) {
            double* row = cols.row(static_cast<Eigen::Index>(y - y0) * input.width + x).data();
            for (int ky = 0; ky < layer.kernel_h; ++ky) {
                const int iy = y + ky - ph;
                for (int kx = 0; kx < layer.kernel_w; ++kx) {
                    const int ix = x + kx - pw;
                    double* dst = row + (static_cast<std::size_t>(ky) * layer.kernel_w + kx) * cin;
                    if (iy < 0 || iy >= input.height || ix < 0 || ix >= input.width) {
                        std::fill(dst, dst + cin, 0.0);
                    } else {
                        const double* src = &input.values[(static_cast<std::size_t>(iy) * input.width + ix) * cin];
                        std::copy(src, src + cin, dst);
                    }
                }
            }
        }
    }
}

void col2im_add(const RowMatrix& grad_cols, const ConvLayer& layer, int y0, int y1,
                Tensor3& grad_input) {
    const int ph = layer.kernel_h / 2;
    const int pw = layer.kernel_w / 2;
    const int cin = layer.in_channels;
    for (int y = y0; y < y1; ++y) {
        for (int x = 0; x < grad_input.width; ++x) {
            const double* row =
                grad_cols.row(static_cast<Eigen::Index>(y - y0) * grad_input.width + x).data();
            for (int ky = 0; ky < layer.kernel_h; ++ky) {
                const int iy = y + ky - ph;
                if (iy < 0 || iy >= grad_input.height) continue;
                for (int kx = 0; kx < layer.kernel_w; ++kx) {
                    const int ix = x + kx - pw;
                    if (ix < 0 || ix >= grad_input.width) continue;
                    const double* src = row + (static_cast<std::size_t>(ky) * layer.kernel_w + kx) * cin;
                    double* dst = &grad_input.values[(static_cast<std::size_t>(iy) * grad_input.width + ix) * cin];
                    for (int c = 0; c < cin; ++c) dst[c] += src[c];
                }
            }
        }
    }
}

void check_input(const Tensor3& input, const ConvLayer& layer) {
    layer.validate();
    if (input.channels != layer.in_channels) {
        throw ConfigError("conv2d: input has " + std::to_string(input.channels) +
                          " channels, layer expects " + std::to_string(layer.in_channels));
    }
}

}  // namespace

ConvLayer ConvLayer::zeros(int kh, int kw, int cin, int cout, Activation act) {
    ConvLayer layer;
    layer.kernel_h = kh;
    layer.kernel_w = kw;
    layer.in_channels = cin;
    layer.out_channels = cout;
    layer.activation = act;
    layer.kernel.assign(layer.kernel_size(), 0.0);
    layer.bias.assign(static_cast<std::size_t>(cout), 0.0);
    layer.validate();
    return layer;
}

void ConvLayer::validate() const {
    if (kernel_h <= 0 || kernel_w <= 0 || kernel_h % 2 == 0 || kernel_w % 2 == 0)
        throw ConfigError("ConvLayer: kernel dimensions must be positive and odd");
    if (in_channels <= 0 || out_channels <= 0)
        throw ConfigError("ConvLayer: channel counts must be positive");
    if (kernel.size() != kernel_size())
        throw ConfigError("ConvLayer: kernel buffer size does not match its shape");
    if (bias.size() != static_cast<std::size_t>(out_channels))
        throw ConfigError("ConvLayer: bias length must equal output channels");
}

Tensor3 conv2d_forward(const Tensor3& input, const ConvLayer& layer) {
    check_input(input, layer);
    if (!all_finite(input.values)) throw NumericError("conv2d_forward: non-finite input");

    Tensor3 output(input.height, input.width, layer.out_channels);
    const Eigen::Index k = static_cast<Eigen::Index>(layer.kernel_h) * layer.kernel_w * layer.in_channels;
    // Eigen peels unaligned heads differently depending on the address, so every product
    // runs on Eigen-owned (aligned) copies to keep results independent of where the
    // std::vector buffers happen to live.
    const RowMatrix weights = ConstRowMap(layer.kernel.data(), k, layer.out_channels);
    const Eigen::RowVectorXd bias = Eigen::Map<const Eigen::RowVectorXd>(layer.bias.data(), layer.out_channels);

    RowMatrix cols;
    RowMatrix block;
    const int step = band_rows(input, layer);
    for (int y0 = 0; y0 < input.height; y0 += step) {
        const int y1 = std::min(input.height, y0 + step);
        im2col(input, layer, y0, y1, cols);
        block.noalias() = cols * weights;
        block.rowwise() += bias;
        RowMap(&output.values[static_cast<std::size_t>(y0) * input.width * layer.out_channels],
               cols.rows(), layer.out_channels) = block;
    }
    if (layer.activation == Activation::ReLU) {
        for (double& v : output.values) v = v > 0.0 ? v : 0.0;
    }
    if (!all_finite(output.values)) throw NumericError("conv2d_forward: non-finite output");
    return output;
}

ConvGrads conv2d_backward(const Tensor3& input, const ConvLayer& layer, const Tensor3& output,
                          const Tensor3& upstream_grad, bool need_input_grad) {
    check_input(input, layer);
    if (!output.same_shape(upstream_grad) || output.height != input.height ||
        output.width != input.width || output.channels != layer.out_channels) {
        throw ConfigError("conv2d_backward: upstream gradient shape does not match forward output");
    }

    // Gradient with respect to the pre-activation.
    std::vector<double> grad_pre = upstream_grad.values;
    if (layer.activation == Activation::ReLU) {
        for (std::size_t i = 0; i < grad_pre.size(); ++i)
            if (!(output.values[i] > 0.0)) grad_pre[i] = 0.0;
    }

    ConvGrads grads;
    grads.kernel.assign(layer.kernel_size(), 0.0);
    grads.bias.assign(static_cast<std::size_t>(layer.out_channels), 0.0);
    if (need_input_grad) grads.input = Tensor3(input.height, input.width, input.channels);

    const Eigen::Index k = static_cast<Eigen::Index>(layer.kernel_h) * layer.kernel_w * layer.in_channels;
    // Aligned copies, as in the forward pass.
    const RowMatrix weights = ConstRowMap(layer.kernel.data(), k, layer.out_channels);
    RowMatrix grad_kernel = RowMatrix::Zero(k, layer.out_channels);
    Eigen::RowVectorXd grad_bias = Eigen::RowVectorXd::Zero(layer.out_channels);

    RowMatrix cols;
    RowMatrix gpre;
    RowMatrix grad_cols;
    const int step = band_rows(input, layer);
    for (int y0 = 0; y0 < input.height; y0 += step) {
        const int y1 = std::min(input.height, y0 + step);
        im2col(input, layer, y0, y1, cols);
        gpre = ConstRowMap(&grad_pre[static_cast<std::size_t>(y0) * input.width * layer.out_channels],
                           cols.rows(), layer.out_channels);
        grad_kernel.noalias() += cols.transpose() * gpre;
        grad_bias += gpre.colwise().sum();
        if (need_input_grad) {
            grad_cols.noalias() = gpre * weights.transpose();
            col2im_add(grad_cols, layer, y0, y1, grads.input);
        }
    }
    RowMap(grads.kernel.data(), k, layer.out_channels) = grad_kernel;
    Eigen::Map<Eigen::RowVectorXd>(grads.bias.data(), layer.out_channels) = grad_bias;
    return grads;
}

ConvGrads conv2d_backward(const Tensor3& input, const ConvLayer& layer,
                          const Tensor3& upstream_grad) {
    const Tensor3 output = conv2d_forward(input, layer);
    return conv2d_backward(input, layer, output, upstream_grad, true);
}

}  // namespace deepfuse
