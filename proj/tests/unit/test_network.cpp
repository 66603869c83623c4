#include <doctest.h>

#include <cmath>
#include <fstream>

#include "deepfuse/checkpoint.hpp"
#include "deepfuse/error.hpp"
#include "deepfuse/gradcheck.hpp"
#include "deepfuse/mefssim.hpp"
#include "deepfuse/network.hpp"
#include "support/fixtures.hpp"

using namespace deepfuse;

namespace {

// Small plan so finite differences over every parameter stay cheap.
ArchConfig tiny(MergeMode merge = MergeMode::Add, std::uint64_t seed = 3) {
    ArchConfig a;
    a.kernels = {5, 3, 3, 3, 3};
    a.channels = {3, 4, 4, 3};
    a.merge = merge;
    a.seed = seed;
    return a;
}

// Nonzero biases so ReLU units sit away from their kinks more often.
NetworkParams with_biases(NetworkParams p, std::uint64_t seed) {
    std::vector<double> flat = p.flatten();
    const std::vector<double> noise = fixtures::uniform(flat.size(), -0.05, 0.05, seed);
    NetworkParams z = p.zeros_like();
    std::size_t offset = 0;
    auto fill = [&](ConvLayer& l) {
        offset += l.kernel.size();
        for (std::size_t i = 0; i < l.bias.size(); ++i) flat[offset + i] += 0.1 + noise[offset + i];
        offset += l.bias.size();
    };
    for (auto& l : z.prefusion) fill(l);
    for (auto& l : z.reconstruction) fill(l);
    p.assign(flat);
    return p;
}

double variance(const PlanarImage& img) {
    const double mu = mean(img);
    double v = 0.0;
    for (double x : img.pixels) v += (x - mu) * (x - mu);
    return v / static_cast<double>(img.size());
}

}  // namespace

TEST_SUITE("init_network") {
    TEST_CASE("same seed gives bit-identical parameters, different seeds differ") {
        CHECK(init_network(ArchConfig::desk()) == init_network(ArchConfig::desk()));
        ArchConfig other = ArchConfig::desk();
        other.seed = 1;
        CHECK_FALSE(init_network(other) == init_network(ArchConfig::desk()));
    }

    TEST_CASE("biases start at zero and layer shapes follow the plan") {
        const NetworkParams p = init_network(ArchConfig::paper());
        for (const auto& l : p.prefusion)
            for (double b : l.bias) CHECK(b == 0.0);
        for (const auto& l : p.reconstruction)
            for (double b : l.bias) CHECK(b == 0.0);
        CHECK(p.prefusion[0].in_channels == 1);
        CHECK(p.prefusion[0].kernel_h == 5);
        CHECK(p.prefusion[1].kernel_h == 7);
        CHECK(p.reconstruction[2].out_channels == 1);
        CHECK(p.reconstruction[2].activation == Activation::Linear);
        CHECK(p.reconstruction[0].in_channels == 32);
    }

    TEST_CASE("concatenation doubles the first reconstruction layer's input") {
        const NetworkParams p = init_network(ArchConfig::concat());
        CHECK(p.reconstruction[0].in_channels == 2 * p.arch.channels[1]);
    }

    TEST_CASE("forward from init is finite with nonzero variance") {
        const PlanarImage a = fixtures::random_image(24, 24, 1);
        const PlanarImage b = fixtures::random_image(24, 24, 2);
        const PlanarImage out = infer(init_network(ArchConfig::desk()), a, b);
        CHECK(all_finite(out.pixels));
        CHECK(variance(out) > 0.0);
    }

    TEST_CASE("invalid plans are configuration errors") {
        ArchConfig a = ArchConfig::desk();
        a.kernels[0] = 3;
        CHECK_THROWS_AS(init_network(a), ConfigError);
        a = ArchConfig::desk();
        a.channels[2] = 0;
        CHECK_THROWS_AS(init_network(a), ConfigError);
        a = ArchConfig::desk();
        a.kernels[3] = 4;
        CHECK_THROWS_AS(init_network(a), ConfigError);
    }

    TEST_CASE("parameters are float32-representable") {
        for (double v : init_network(ArchConfig::desk()).flatten())
            CHECK(v == static_cast<double>(static_cast<float>(v)));
    }
}

TEST_SUITE("forward") {
    TEST_CASE("swapping the inputs is exact for every commutative merge") {
        const PlanarImage a = fixtures::random_image(20, 19, 4);
        const PlanarImage b = fixtures::random_image(20, 19, 5);
        for (MergeMode m : {MergeMode::Add, MergeMode::Mean, MergeMode::Max, MergeMode::Product}) {
            ArchConfig arch = ArchConfig::desk();
            arch.merge = m;
            const NetworkParams p = with_biases(init_network(arch), 6);
            CHECK(forward(p, a, b).fused == forward(p, b, a).fused);
        }
    }

    TEST_CASE("zero inputs with zero biases give a zero output") {
        const PlanarImage zero(18, 18);
        const PlanarImage out = forward(init_network(ArchConfig::desk()), zero, zero).fused;
        for (double v : out.pixels) CHECK(v == 0.0);
    }

    TEST_CASE("output resolution equals input resolution") {
        const NetworkParams p = init_network(ArchConfig::desk());
        for (auto [h, w] : {std::pair{17, 17}, std::pair{31, 20}, std::pair{64, 48}}) {
            const PlanarImage out = infer(p, fixtures::random_image(h, w, 1), fixtures::random_image(h, w, 2));
            CHECK(out.height == h);
            CHECK(out.width == w);
        }
    }

    TEST_CASE("infer and forward agree bit-for-bit") {
        const NetworkParams p = with_biases(init_network(ArchConfig::desk()), 2);
        const PlanarImage a = fixtures::random_image(21, 23, 7);
        const PlanarImage b = fixtures::random_image(21, 23, 8);
        CHECK(infer(p, a, b) == forward(p, a, b).fused);
    }

    TEST_CASE("both streams pass through the same stored pre-fusion weights") {
        const NetworkParams p = init_network(ArchConfig::desk());
        const PlanarImage a = fixtures::random_image(16, 16, 9);
        const ForwardResult r = forward(p, a, a);
        CHECK(r.cache.c1[0] == r.cache.c1[1]);
        CHECK(r.cache.c2[0] == r.cache.c2[1]);
    }

    TEST_CASE("mismatched input sizes are configuration errors") {
        const NetworkParams p = init_network(ArchConfig::desk());
        CHECK_THROWS_AS(forward(p, fixtures::random_image(16, 16, 1), fixtures::random_image(16, 17, 1)),
                        ConfigError);
    }
}

TEST_SUITE("backward") {
    TEST_CASE("zero upstream gradient gives zero parameter gradients") {
        const NetworkParams p = with_biases(init_network(ArchConfig::desk()), 1);
        const PlanarImage a = fixtures::random_image(18, 18, 1);
        const ForwardResult r = forward(p, a, fixtures::random_image(18, 18, 2));
        for (double g : backward(p, r.cache, PlanarImage(18, 18)).flatten()) CHECK(g == 0.0);
    }

    TEST_CASE("identical inputs give tied-layer gradients of exactly twice one stream") {
        const NetworkParams p = with_biases(init_network(ArchConfig::desk()), 3);
        const PlanarImage a = fixtures::random_image(18, 18, 4);
        const ForwardResult r = forward(p, a, a);
        const PlanarImage up = fixtures::random_image(18, 18, 5, -1.0, 1.0);
        const NetworkParams g = backward(p, r.cache, up);

        // Single-stream contribution, backpropagated by hand through the public ops.
        const ForwardCache& c = r.cache;
        const ConvGrads g5 = conv2d_backward(c.c4, p.reconstruction[2], c.output, to_tensor(up));
        const ConvGrads g4 = conv2d_backward(c.c3, p.reconstruction[1], c.c4, g5.input);
        const ConvGrads g3 = conv2d_backward(c.merged, p.reconstruction[0], c.c3, g4.input);
        const auto [ga, gb] = merge_backward(c.c2[0], c.c2[1], p.arch.merge, g3.input);
        const ConvGrads g2 = conv2d_backward(c.c1[0], p.prefusion[1], c.c2[0], ga);
        const ConvGrads g1 = conv2d_backward(c.inputs[0], p.prefusion[0], c.c1[0], g2.input);
        for (std::size_t i = 0; i < g2.kernel.size(); ++i) CHECK(g.prefusion[1].kernel[i] == 2.0 * g2.kernel[i]);
        for (std::size_t i = 0; i < g1.kernel.size(); ++i) CHECK(g.prefusion[0].kernel[i] == 2.0 * g1.kernel[i]);
        for (std::size_t i = 0; i < g1.bias.size(); ++i) CHECK(g.prefusion[0].bias[i] == 2.0 * g1.bias[i]);
        CHECK(g.reconstruction[2].kernel == g5.kernel);
    }

    TEST_CASE("end-to-end MEF-SSIM gradient matches central differences on 16x16 inputs") {
        fixtures::CapturedLog quiet;
        const PlanarImage a = fixtures::random_image(16, 16, 10, 0.0, 0.6);
        const PlanarImage b = fixtures::random_image(16, 16, 11, 0.3, 1.0);
        for (MergeMode m : {MergeMode::Add, MergeMode::Max, MergeMode::Product, MergeMode::Concat}) {
            CAPTURE(to_string(m));
            const NetworkParams p = with_biases(init_network(tiny(m)), 12);
            const ForwardResult r = forward(p, a, b);
            const MefSsimLossGrad lg = mef_ssim_loss_grad(a, b, r.fused);
            const std::vector<double> analytic = backward(p, r.cache, lg.gradient).flatten();
            // Larger steps straddle ReLU kinks of the biases often enough to exceed 1e-3.
            GradCheckOptions opts;
            opts.epsilon = 1e-6;
            opts.kink_tolerance = 1e-3;
            const auto res = finite_diff_check(
                [&](std::span<const double> v) {
                    NetworkParams q = p;
                    q.assign(v);
                    return mef_ssim_loss_grad(a, b, infer(q, a, b)).loss;
                },
                p.flatten(), analytic, opts);
            INFO("worst coordinate ", res.worst_index, ": analytic ", res.worst_analytic, ", numeric ",
                 res.worst_numeric, " (", res.checked, " checked, ", res.skipped, " skipped)");
            CHECK(res.checked > p.parameter_count() * 3 / 4);
            CHECK(res.max_relative_error < 1e-3);
        }
    }

    TEST_CASE("a cache from other parameters is a usage error") {
        NetworkParams p = init_network(ArchConfig::desk());
        const PlanarImage a = fixtures::random_image(16, 16, 1);
        const ForwardResult r = forward(p, a, a);
        p.reconstruction[1].kernel[0] += 1.0;
        CHECK_THROWS_AS(backward(p, r.cache, PlanarImage(16, 16)), UsageError);
    }
}

TEST_SUITE("checkpoint") {
    TEST_CASE("save, load and forward round-trip bit-exactly") {
        fixtures::TempDir dir("df-ckpt");
        ArchConfig arch = ArchConfig::desk();
        arch.merge = MergeMode::Max;
        arch.seed = 77;
        const NetworkParams p = with_biases(init_network(arch), 5);
        NetworkParams rounded = p;
        round_to_float32(rounded);
        save_checkpoint(rounded, dir / "m.dfn");
        const NetworkParams q = load_checkpoint(dir / "m.dfn");
        CHECK(q == rounded);
        const PlanarImage a = fixtures::random_image(20, 20, 1);
        const PlanarImage b = fixtures::random_image(20, 20, 2);
        CHECK(infer(q, a, b) == infer(rounded, a, b));
    }

    TEST_CASE("file size is header plus four bytes per parameter plus checksum") {
        fixtures::TempDir dir("df-ckpt");
        const NetworkParams p = init_network(ArchConfig::paper());
        CHECK(p.parameter_count() == 5 * 5 * 16 + 16 + 7 * 7 * 16 * 32 + 32 + 7 * 7 * 32 * 32 + 32 +
                                         5 * 5 * 32 * 16 + 16 + 5 * 5 * 16 + 1);
        save_checkpoint(p, dir / "p.dfn");
        CHECK(std::filesystem::file_size(dir / "p.dfn") ==
              kCheckpointHeaderBytes + 4 * p.parameter_count() + kCheckpointTrailerBytes);
    }

    TEST_CASE("truncated payload is a checksum failure") {
        std::vector<std::uint8_t> bytes = encode_checkpoint(init_network(ArchConfig::desk()));
        bytes.resize(bytes.size() - 10);
        try {
            decode_checkpoint(bytes);
            FAIL("decode accepted a truncated file");
        } catch (const CheckpointError& e) {
            CHECK(e.kind() == CheckpointError::Kind::ChecksumMismatch);
        }
    }

    TEST_CASE("distinct errors for each corruption") {
        const std::vector<std::uint8_t> good = encode_checkpoint(init_network(ArchConfig::desk()));
        auto kind_of = [](std::vector<std::uint8_t> b) {
            try {
                decode_checkpoint(b);
            } catch (const CheckpointError& e) {
                return e.kind();
            }
            FAIL("decode accepted corrupted bytes");
            return CheckpointError::Kind::Io;
        };
        std::vector<std::uint8_t> b = good;
        b[0] = 'X';
        CHECK(kind_of(b) == CheckpointError::Kind::BadMagic);
        b = good;
        b[4] = 9;
        CHECK(kind_of(b) == CheckpointError::Kind::VersionMismatch);
        b = good;
        b.resize(30);
        CHECK(kind_of(b) == CheckpointError::Kind::Truncated);
        b = good;
        b[kCheckpointHeaderBytes + 17] ^= 0x40;
        CHECK(kind_of(b) == CheckpointError::Kind::ChecksumMismatch);
        b = good;
        b.push_back(0);
        CHECK(kind_of(b) == CheckpointError::Kind::ChecksumMismatch);
    }

    TEST_CASE("missing file is an I/O error") {
        try {
            load_checkpoint("/nonexistent/dir/model.dfn");
            FAIL("loaded a missing file");
        } catch (const CheckpointError& e) {
            CHECK(e.kind() == CheckpointError::Kind::Io);
        }
    }

    TEST_CASE("architecture and seed travel with the weights") {
        ArchConfig arch = ArchConfig::concat();
        arch.seed = 123456789012345ULL;
        const NetworkParams q = decode_checkpoint(encode_checkpoint(init_network(arch)));
        CHECK(q.arch == arch);
    }
}
