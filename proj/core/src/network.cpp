#include "deepfuse/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "deepfuse/error.hpp"

namespace deepfuse {
namespace {

template <typename Fn>
void for_each_layer(NetworkParams& p, Fn&& fn) {
    for (auto& l : p.prefusion) fn(l);
    for (auto& l : p.reconstruction) fn(l);
}

template <typename Fn>
void for_each_layer(const NetworkParams& p, Fn&& fn) {
    for (const auto& l : p.prefusion) fn(l);
    for (const auto& l : p.reconstruction) fn(l);
}

std::uint64_t fnv1a(std::uint64_t hash, const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

void check_inputs(const NetworkParams& params, const PlanarImage& first,
                  const PlanarImage& second) {
    if (!first.same_dims(second))
        throw ConfigError("network: input images must share dimensions");
    if (first.empty()) throw ConfigError("network: empty input image");
    (void)params;
}

}  // namespace

ArchConfig ArchConfig::paper() { return ArchConfig{}; }

ArchConfig ArchConfig::desk() {
    ArchConfig a;
    a.kernels = {5, 5, 5, 3, 3};
    a.channels = {8, 16, 16, 8};
    return a;
}

ArchConfig ArchConfig::concat() {
    ArchConfig a;
    a.merge = MergeMode::Concat;
    a.channels = {16, 32, 64, 16};
    return a;
}

int ArchConfig::receptive_field() const noexcept {
    int rf = 1;
    for (int k : kernels) rf += k - 1;
    return rf;
}

void ArchConfig::validate() const {
    if (kernels[0] != 5) throw ConfigError("ArchConfig: first-layer kernel must be 5x5");
    for (int k : kernels)
        if (k <= 0 || k % 2 == 0) throw ConfigError("ArchConfig: kernel sizes must be positive and odd");
    for (int c : channels)
        if (c <= 0) throw ConfigError("ArchConfig: channel counts must be positive");
}

std::size_t NetworkParams::parameter_count() const noexcept {
    std::size_t n = 0;
    for_each_layer(*this, [&](const ConvLayer& l) { n += l.parameter_count(); });
    return n;
}

std::vector<double> NetworkParams::flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for_each_layer(*this, [&](const ConvLayer& l) {
        out.insert(out.end(), l.kernel.begin(), l.kernel.end());
        out.insert(out.end(), l.bias.begin(), l.bias.end());
    });
    return out;
}

void NetworkParams::assign(std::span<const double> values) {
    if (values.size() != parameter_count())
        throw ConfigError("NetworkParams::assign: expected " + std::to_string(parameter_count()) +
                          " values, got " + std::to_string(values.size()));
    std::size_t offset = 0;
    for_each_layer(*this, [&](ConvLayer& l) {
        std::copy_n(values.begin() + offset, l.kernel.size(), l.kernel.begin());
        offset += l.kernel.size();
        std::copy_n(values.begin() + offset, l.bias.size(), l.bias.begin());
        offset += l.bias.size();
    });
}

NetworkParams NetworkParams::zeros_like() const {
    NetworkParams z = *this;
    for_each_layer(z, [](ConvLayer& l) {
        std::fill(l.kernel.begin(), l.kernel.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    });
    return z;
}

NetworkParams init_network(const ArchConfig& arch) {
    arch.validate();
    const int merged_channels =
        arch.merge == MergeMode::Concat ? 2 * arch.channels[1] : arch.channels[1];
    NetworkParams p;
    p.arch = arch;
    p.prefusion[0] = ConvLayer::zeros(arch.kernels[0], arch.kernels[0], 1, arch.channels[0], Activation::ReLU);
    p.prefusion[1] = ConvLayer::zeros(arch.kernels[1], arch.kernels[1], arch.channels[0], arch.channels[1], Activation::ReLU);
    p.reconstruction[0] = ConvLayer::zeros(arch.kernels[2], arch.kernels[2], merged_channels, arch.channels[2], Activation::ReLU);
    p.reconstruction[1] = ConvLayer::zeros(arch.kernels[3], arch.kernels[3], arch.channels[2], arch.channels[3], Activation::ReLU);
    p.reconstruction[2] = ConvLayer::zeros(arch.kernels[4], arch.kernels[4], arch.channels[3], 1, Activation::Linear);

    std::mt19937_64 rng(arch.seed);
    for_each_layer(p, [&](ConvLayer& l) {
        const double fan_in = static_cast<double>(l.kernel_h) * l.kernel_w * l.in_channels;
        const double gain = l.activation == Activation::ReLU ? 2.0 : 1.0;
        std::normal_distribution<double> dist(0.0, std::sqrt(gain / fan_in));
        for (double& w : l.kernel) w = dist(rng);
    });
    round_to_float32(p);
    return p;
}

void round_to_float32(NetworkParams& params) {
    for_each_layer(params, [](ConvLayer& l) {
        for (double& w : l.kernel) w = static_cast<double>(static_cast<float>(w));
        for (double& b : l.bias) b = static_cast<double>(static_cast<float>(b));
    });
}

std::uint64_t fingerprint(const NetworkParams& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv1a(h, params.arch.kernels.data(), sizeof(params.arch.kernels));
    h = fnv1a(h, params.arch.channels.data(), sizeof(params.arch.channels));
    const auto merge = static_cast<int>(params.arch.merge);
    h = fnv1a(h, &merge, sizeof(merge));
    for_each_layer(params, [&](const ConvLayer& l) {
        h = fnv1a(h, l.kernel.data(), l.kernel.size() * sizeof(double));
        h = fnv1a(h, l.bias.data(), l.bias.size() * sizeof(double));
    });
    return h;
}

ForwardResult forward(const NetworkParams& params, const PlanarImage& first,
                      const PlanarImage& second) {
    check_inputs(params, first, second);
    ForwardResult r;
    ForwardCache& c = r.cache;
    c.inputs = {to_tensor(first), to_tensor(second)};
    for (int k = 0; k < 2; ++k) {
        c.c1[k] = conv2d_forward(c.inputs[k], params.prefusion[0]);
        c.c2[k] = conv2d_forward(c.c1[k], params.prefusion[1]);
    }
    c.merged = merge_forward(c.c2[0], c.c2[1], params.arch.merge);
    c.c3 = conv2d_forward(c.merged, params.reconstruction[0]);
    c.c4 = conv2d_forward(c.c3, params.reconstruction[1]);
    c.output = conv2d_forward(c.c4, params.reconstruction[2]);
    c.params_fingerprint = fingerprint(params);
    r.fused = to_planar(c.output);
    return r;
}

PlanarImage infer(const NetworkParams& params, const PlanarImage& first,
                  const PlanarImage& second) {
    check_inputs(params, first, second);
    std::array<Tensor3, 2> features;
    for (int k = 0; k < 2; ++k) {
        const Tensor3 c1 = conv2d_forward(to_tensor(k == 0 ? first : second), params.prefusion[0]);
        features[k] = conv2d_forward(c1, params.prefusion[1]);
    }
    Tensor3 t = merge_forward(features[0], features[1], params.arch.merge);
    features = {};
    for (const ConvLayer& layer : params.reconstruction) t = conv2d_forward(t, layer);
    return to_planar(t);
}

NetworkParams backward(const NetworkParams& params, const ForwardCache& cache,
                       const PlanarImage& output_grad) {
    if (cache.params_fingerprint != fingerprint(params))
        throw UsageError("network backward: cache was produced by different parameters");
    const Tensor3 upstream = to_tensor(output_grad);
    if (!upstream.same_shape(cache.output))
        throw ConfigError("network backward: gradient shape does not match the output");

    NetworkParams grads = params.zeros_like();
    auto add = [](ConvLayer& dst, const ConvGrads& g) {
        for (std::size_t i = 0; i < g.kernel.size(); ++i) dst.kernel[i] += g.kernel[i];
        for (std::size_t i = 0; i < g.bias.size(); ++i) dst.bias[i] += g.bias[i];
    };

    ConvGrads g5 = conv2d_backward(cache.c4, params.reconstruction[2], cache.output, upstream);
    add(grads.reconstruction[2], g5);
    ConvGrads g4 = conv2d_backward(cache.c3, params.reconstruction[1], cache.c4, g5.input);
    add(grads.reconstruction[1], g4);
    ConvGrads g3 = conv2d_backward(cache.merged, params.reconstruction[0], cache.c3, g4.input);
    add(grads.reconstruction[0], g3);
    auto [ga, gb] = merge_backward(cache.c2[0], cache.c2[1], params.arch.merge, g3.input);
    const std::array<Tensor3*, 2> stream_grads{&ga, &gb};
    for (int k = 0; k < 2; ++k) {
        ConvGrads g2 = conv2d_backward(cache.c1[k], params.prefusion[1], cache.c2[k], *stream_grads[k]);
        add(grads.prefusion[1], g2);
        ConvGrads g1 = conv2d_backward(cache.inputs[k], params.prefusion[0], cache.c1[k], g2.input, false);
        add(grads.prefusion[0], g1);
    }
    return grads;
}

void accumulate(NetworkParams& target, const NetworkParams& grads, double scale) {
    if (target.parameter_count() != grads.parameter_count())
        throw ConfigError("accumulate: parameter layouts differ");
    auto dst = target.flatten();
    const auto src = grads.flatten();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
    target.assign(dst);
}

}  // namespace deepfuse
