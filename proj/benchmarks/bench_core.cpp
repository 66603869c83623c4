#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "deepfuse/color.hpp"
#include "deepfuse/conv.hpp"
#include "deepfuse/exposure.hpp"
#include "deepfuse/log.hpp"
#include "deepfuse/mefssim.hpp"
#include "deepfuse/mertens.hpp"
#include "deepfuse/network.hpp"
#include "deepfuse/training.hpp"

using namespace deepfuse;

namespace {

void fill_uniform(std::vector<double>& v, double lo, double hi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    for (double& x : v) x = d(rng);
}

// Layer C2 of the desk plan at patch resolution: 16 -> 32 channels, 7x7.
struct ConvFixture {
    Tensor3 input{32, 32, 16};
    ConvLayer layer = ConvLayer::zeros(7, 7, 16, 32, Activation::ReLU);
    Tensor3 upstream{32, 32, 32};
    ConvFixture() {
        fill_uniform(input.values, -1.0, 1.0, 1);
        fill_uniform(layer.kernel, -0.1, 0.1, 2);
        fill_uniform(upstream.values, -1.0, 1.0, 3);
    }
};

ExposurePair scene_pair(int size) {
    return synthesize_exposure_pair(synthesize_scene(size, size, 900), -2.0, 2.0);
}

void BM_ConvForward(benchmark::State& state) {
    const ConvFixture f;
    for (auto _ : state) benchmark::DoNotOptimize(conv2d_forward(f.input, f.layer));
}
BENCHMARK(BM_ConvForward)->Unit(benchmark::kMicrosecond);

void BM_ConvBackward(benchmark::State& state) {
    const ConvFixture f;
    const Tensor3 out = conv2d_forward(f.input, f.layer);
    for (auto _ : state) benchmark::DoNotOptimize(conv2d_backward(f.input, f.layer, out, f.upstream));
}
BENCHMARK(BM_ConvBackward)->Unit(benchmark::kMicrosecond);

void BM_MefSsimLossGrad(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const ExposurePair p = scene_pair(n);
    const PlanarImage u = luminance(p.under), o = luminance(p.over);
    PlanarImage f(n, n);
    for (std::size_t i = 0; i < f.size(); ++i) f.pixels[i] = 0.5 * (u.pixels[i] + o.pixels[i]);
    ScopedLogSink quiet([](LogLevel, std::string_view) {});
    for (auto _ : state) benchmark::DoNotOptimize(mef_ssim_loss_grad(u, o, f));
}
BENCHMARK(BM_MefSsimLossGrad)->Arg(32)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_MertensFuse(benchmark::State& state) {
    const ExposurePair p = scene_pair(static_cast<int>(state.range(0)));
    const std::vector<RgbImage> stack{p.under, p.over};
    for (auto _ : state) benchmark::DoNotOptimize(mertens_fuse(stack));
}
BENCHMARK(BM_MertensFuse)->Arg(256)->Unit(benchmark::kMillisecond);

// Forward, loss and backward for one 32x32 patch: the per-sample cost of an optimizer step.
void BM_TrainingSample(benchmark::State& state) {
    const ExposurePair p = scene_pair(64);
    const PlanarImage u = crop(luminance(p.under), 16, 16, 32, 32);
    const PlanarImage o = crop(luminance(p.over), 16, 16, 32, 32);
    const NetworkParams params = init_network(ArchConfig::desk());
    for (auto _ : state) {
        const ForwardResult r = forward(params, u, o);
        const MefSsimLossGrad lg = mef_ssim_loss_grad(u, o, r.fused);
        benchmark::DoNotOptimize(backward(params, r.cache, lg.gradient));
    }
}
BENCHMARK(BM_TrainingSample)->Unit(benchmark::kMillisecond);

void BM_Infer(benchmark::State& state) {
    const ExposurePair p = scene_pair(static_cast<int>(state.range(0)));
    const PlanarImage u = luminance(p.under), o = luminance(p.over);
    const NetworkParams params = init_network(ArchConfig::desk());
    for (auto _ : state) benchmark::DoNotOptimize(infer(params, u, o));
}
BENCHMARK(BM_Infer)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
