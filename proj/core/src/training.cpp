#include "deepfuse/training.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include <json.hpp>

#include "deepfuse/checkpoint.hpp"
#include "deepfuse/error.hpp"
#include "deepfuse/log.hpp"

namespace deepfuse {
namespace {

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

void check_dataset(const TrainConfig& config, std::span<const PatchPair> dataset) {
    if (dataset.empty()) throw ConfigError("train: dataset is empty");
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const PatchPair& p = dataset[i];
        if (p.under.height != config.patch_size || p.under.width != config.patch_size ||
            !p.under.same_dims(p.over)) {
            throw ConfigError("train: patch " + std::to_string(i) + " does not match the configured patch size");
        }
        if (is_supervised(config.loss) && !p.target) {
            throw ConfigError("train: loss '" + std::string(to_string(config.loss)) +
                              "' needs a target for every patch; patch " + std::to_string(i) +
                              " has none");
        }
    }
}

AdamConfig adam_config(const TrainConfig& c) {
    return AdamConfig{c.learning_rate, c.beta1, c.beta2, c.adam_epsilon};
}

// --- training-state serialization -------------------------------------------------

constexpr std::array<std::uint8_t, 4> kStateMagic{'D', 'F', 'T', 'S'};
constexpr std::uint32_t kStateVersion = 1;

struct Writer {
    std::vector<std::uint8_t> bytes;
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void blob(std::span<const std::uint8_t> b) {
        u64(b.size());
        bytes.insert(bytes.end(), b.begin(), b.end());
    }
};

struct Reader {
    std::span<const std::uint8_t> bytes;
    std::size_t offset = 0;
    void need(std::size_t n) const {
        if (offset + n > bytes.size())
            throw CheckpointError(CheckpointError::Kind::Truncated, "training state: truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[offset++]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::span<const std::uint8_t> blob() {
        const std::uint64_t n = u64();
        need(n);
        auto out = bytes.subspan(offset, n);
        offset += n;
        return out;
    }
};

}  // namespace

std::string_view to_string(LossKind kind) noexcept {
    switch (kind) {
        case LossKind::MefSsim: return "mefssim";
        case LossKind::L1: return "l1";
        case LossKind::L2: return "l2";
        case LossKind::Ssim: return "ssim";
    }
    return "unknown";
}

std::optional<LossKind> parse_loss_kind(std::string_view name) noexcept {
    for (LossKind k : {LossKind::MefSsim, LossKind::L1, LossKind::L2, LossKind::Ssim})
        if (name == to_string(k)) return k;
    return std::nullopt;
}

TrainConfig TrainConfig::desk() {
    TrainConfig c;
    c.patch_size = 32;
    c.patches_per_epoch = 2000;
    c.epochs = 20;
    return c;
}

TrainConfig TrainConfig::paper() {
    TrainConfig c;
    c.patches_per_epoch = 30000;
    c.epochs = 100;
    c.learning_rate = 1e-4;
    return c;
}

void TrainConfig::validate(const ArchConfig& arch) const {
    arch.validate();
    metric.validate();
    if (patch_size < arch.receptive_field()) {
        throw ConfigError("TrainConfig: patch size " + std::to_string(patch_size) +
                          " is below the network receptive field " +
                          std::to_string(arch.receptive_field()));
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("TrainConfig: learning rate must be finite and non-negative");
    if (batch_size < 1) throw ConfigError("TrainConfig: batch size must be >= 1");
    if (epochs < 0) throw ConfigError("TrainConfig: epochs must be >= 0");
    if (checkpoint_every < 0) throw ConfigError("TrainConfig: checkpoint cadence must be >= 0");
}

std::vector<PatchPair> build_patch_dataset(std::span<const LumaPair> pairs, const TrainConfig& config) {
    return build_patch_dataset(pairs, config.patch_size, config.patches_per_epoch, config.seed);
}

PatchLoss patch_loss(const PatchPair& patch, const PlanarImage& output, const TrainConfig& config) {
    PatchLoss out;
    switch (config.loss) {
        case LossKind::MefSsim: {
            MefSsimLossGrad lg = mef_ssim_loss_grad(patch.under, patch.over, output, config.metric);
            out.loss = lg.loss;
            out.gradient = std::move(lg.gradient);
            break;
        }
        case LossKind::L1:
        case LossKind::L2: {
            if (!patch.target) throw ConfigError("patch_loss: supervised loss without a target");
            const PlanarImage& t = *patch.target;
            const double inv_n = 1.0 / static_cast<double>(output.size());
            out.gradient = PlanarImage(output.height, output.width);
            double total = 0.0;
            for (std::size_t i = 0; i < output.size(); ++i) {
                const double d = output.pixels[i] - t.pixels[i];
                if (config.loss == LossKind::L1) {
                    total += std::abs(d);
                    out.gradient.pixels[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
                } else {
                    total += d * d;
                    out.gradient.pixels[i] = 2.0 * d * inv_n;
                }
            }
            out.loss = total * inv_n;
            break;
        }
        case LossKind::Ssim: {
            if (!patch.target) throw ConfigError("patch_loss: supervised loss without a target");
            SsimGrad sg = ssim_with_grad(output, *patch.target, config.ssim);
            out.loss = 1.0 - sg.value;
            out.gradient = std::move(sg.gradient);
            for (double& g : out.gradient.pixels) g = -g;
            break;
        }
    }
    return out;
}

double evaluate_loss(const NetworkParams& params, std::span<const PatchPair> dataset,
                     const TrainConfig& config) {
    if (dataset.empty()) return 0.0;
    double total = 0.0;
    for (const PatchPair& p : dataset) {
        const PlanarImage out = infer(params, p.under, p.over);
        total += patch_loss(p, out, config).loss;
    }
    return total / static_cast<double>(dataset.size());
}

TrainingRun resume_training(const TrainConfig& config, std::span<const PatchPair> dataset,
                            TrainingRun run, const EpochCallback& on_epoch) {
    config.validate(run.params.arch);
    check_dataset(config, dataset);
    if (run.optimizer.first_moment.size() != run.params.parameter_count())
        throw ConfigError("resume_training: optimizer state does not match the network");

    const AdamConfig adam = adam_config(config);
    std::vector<double> flat = run.params.flatten();
    const std::size_t batch = static_cast<std::size_t>(config.batch_size);

    for (int epoch = run.epochs_completed + 1; epoch <= config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        const std::vector<std::size_t> order = epoch_order(dataset.size(), config.seed, epoch);
        double epoch_loss = 0.0;
        for (std::size_t first = 0; first < order.size(); first += batch) {
            const std::size_t last = std::min(order.size(), first + batch);
            NetworkParams grads = run.params.zeros_like();
            for (std::size_t k = first; k < last; ++k) {
                const std::size_t id = order[k];
                const PatchPair& patch = dataset[id];
                auto where = [&] {
                    return "epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(run.optimizer.step + 1) + ", patch " + std::to_string(id) +
                           " (source " + std::to_string(patch.source_id) + " @ " +
                           std::to_string(patch.origin_y) + "," + std::to_string(patch.origin_x) + ")";
                };
                try {
                    ForwardResult fr = forward(run.params, patch.under, patch.over);
                    const PatchLoss pl = patch_loss(patch, fr.fused, config);
                    if (!std::isfinite(pl.loss)) throw NumericError("non-finite loss");
                    epoch_loss += pl.loss;
                    accumulate(grads, backward(run.params, fr.cache, pl.gradient));
                } catch (const NumericError& e) {
                    throw NumericError(std::string("train: ") + e.what() + " at " + where());
                }
            }
            std::vector<double> g = grads.flatten();
            const double scale = 1.0 / static_cast<double>(last - first);
            for (double& v : g) v *= scale;
            try {
                adam_step(flat, g, run.optimizer, adam);
            } catch (const NumericError& e) {
                throw NumericError(std::string("train: ") + e.what() + " at epoch " +
                                   std::to_string(epoch) + ", step " +
                                   std::to_string(run.optimizer.step + 1));
            }
            run.params.assign(flat);
            round_to_float32(run.params);
            flat = run.params.flatten();
        }

        EpochRecord record;
        record.epoch = epoch;
        record.mean_loss = epoch_loss / static_cast<double>(dataset.size());
        record.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        run.log.push_back(record);
        run.epochs_completed = epoch;
        if (record.mean_loss < run.best_loss) {
            run.best_loss = record.mean_loss;
            run.best_epoch = epoch;
            run.best_params = run.params;
            if (!config.best_checkpoint_path.empty())
                save_checkpoint(run.best_params, config.best_checkpoint_path);
        }
        if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 &&
            !config.state_path.empty()) {
            save_training_state(run, config.state_path);
        }
        if (on_epoch) on_epoch(record);
    }
    return run;
}

TrainingRun train(const TrainConfig& config, std::span<const PatchPair> dataset,
                  const ArchConfig& arch, const EpochCallback& on_epoch) {
    config.validate(arch);
    check_dataset(config, dataset);
    TrainingRun run;
    run.params = init_network(arch);
    run.optimizer = AdamState(run.params.parameter_count());
    run.best_params = run.params;
    const std::size_t probe = config.initial_loss_samples == 0
                                  ? dataset.size()
                                  : std::min(dataset.size(), config.initial_loss_samples);
    run.initial_loss = evaluate_loss(run.params, dataset.first(probe), config);
    if (!std::isfinite(run.initial_loss)) throw NumericError("train: non-finite initial loss");
    return resume_training(config, dataset, std::move(run), on_epoch);
}

TrainingRun train_supervised(const TrainConfig& config, std::span<const PatchPair> dataset,
                             const ArchConfig& arch, const EpochCallback& on_epoch) {
    if (!is_supervised(config.loss))
        throw ConfigError("train_supervised: loss must be one of l1, l2, ssim");
    return train(config, dataset, arch, on_epoch);
}

void save_training_state(const TrainingRun& run, const std::filesystem::path& path) {
    Writer w;
    w.bytes.insert(w.bytes.end(), kStateMagic.begin(), kStateMagic.end());
    w.u32(kStateVersion);
    w.u32(static_cast<std::uint32_t>(run.epochs_completed));
    w.f64(run.initial_loss);
    w.f64(run.best_loss);
    w.u32(static_cast<std::uint32_t>(run.best_epoch));
    w.u64(static_cast<std::uint64_t>(run.optimizer.step));
    w.u64(run.optimizer.first_moment.size());
    for (double v : run.optimizer.first_moment) w.f64(v);
    for (double v : run.optimizer.second_moment) w.f64(v);
    w.u64(run.log.size());
    for (const EpochRecord& r : run.log) {
        w.u32(static_cast<std::uint32_t>(r.epoch));
        w.f64(r.mean_loss);
        w.f64(r.wall_seconds);
    }
    w.blob(encode_checkpoint(run.params));
    w.blob(encode_checkpoint(run.best_params));
    w.u32(static_cast<std::uint32_t>(crc32(0L, w.bytes.data(), static_cast<uInt>(w.bytes.size()))));
    write_file_bytes_atomic(path, w.bytes);
}

TrainingRun load_training_state(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    using Kind = CheckpointError::Kind;
    if (bytes.size() < 12) throw CheckpointError(Kind::Truncated, "training state: truncated");
    if (!std::equal(kStateMagic.begin(), kStateMagic.end(), bytes.begin()))
        throw CheckpointError(Kind::BadMagic, "training state: bad magic");
    const std::size_t body = bytes.size() - 4;
    Reader tail{bytes, body};
    const auto stored_crc = tail.u32();
    if (static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(body))) != stored_crc)
        throw CheckpointError(Kind::ChecksumMismatch, "training state: checksum failure");

    Reader r{std::span<const std::uint8_t>(bytes).first(body), 4};
    if (r.u32() != kStateVersion) throw CheckpointError(Kind::VersionMismatch, "training state: version mismatch");
    TrainingRun run;
    run.epochs_completed = static_cast<int>(r.u32());
    run.initial_loss = r.f64();
    run.best_loss = r.f64();
    run.best_epoch = static_cast<int>(r.u32());
    run.optimizer.step = static_cast<std::int64_t>(r.u64());
    const std::uint64_t n = r.u64();
    r.need(16 * n);
    run.optimizer.first_moment.resize(n);
    run.optimizer.second_moment.resize(n);
    for (auto& v : run.optimizer.first_moment) v = r.f64();
    for (auto& v : run.optimizer.second_moment) v = r.f64();
    const std::uint64_t records = r.u64();
    r.need(20 * records);
    for (std::uint64_t i = 0; i < records; ++i) {
        EpochRecord rec;
        rec.epoch = static_cast<int>(r.u32());
        rec.mean_loss = r.f64();
        rec.wall_seconds = r.f64();
        run.log.push_back(rec);
    }
    run.params = decode_checkpoint(r.blob());
    run.best_params = decode_checkpoint(r.blob());
    if (run.params.parameter_count() != n)
        throw CheckpointError(Kind::Malformed, "training state: optimizer size mismatch");
    return run;
}

void write_epoch_record(std::ostream& out, const EpochRecord& record) {
    nlohmann::json j;
    j["epoch"] = record.epoch;
    j["mean_loss"] = record.mean_loss;
    j["wall_seconds"] = record.wall_seconds;
    out << j.dump() << '\n';
}

}  // namespace deepfuse
