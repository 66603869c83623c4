#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "deepfuse/adam.hpp"
#include "deepfuse/dataset.hpp"
#include "deepfuse/mefssim.hpp"
#include "deepfuse/network.hpp"
#include "deepfuse/ssim.hpp"

namespace deepfuse {

enum class LossKind { MefSsim, L1, L2, Ssim };

std::string_view to_string(LossKind kind) noexcept;
std::optional<LossKind> parse_loss_kind(std::string_view name) noexcept;
constexpr bool is_supervised(LossKind kind) noexcept { return kind != LossKind::MefSsim; }

struct TrainConfig {
    int patch_size = 64;
    std::size_t patches_per_epoch = 2000;
    int epochs = 20;
    double learning_rate = 1e-4;
    int batch_size = 8;
    LossKind loss = LossKind::MefSsim;
    std::uint64_t seed = 0;
    // Training-state snapshot every N epochs to state_path (0 disables).
    int checkpoint_every = 0;
    std::filesystem::path state_path;
    // Lowest-epoch-loss parameters are written here when set.
    std::filesystem::path best_checkpoint_path;
    // Patches used to measure the pre-training loss; 0 uses the whole dataset.
    std::size_t initial_loss_samples = 0;
    MefSsimConfig metric;
    SsimConfig ssim;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;

    /// Single-core preset: 2000 patches of 32x32, 20 epochs.
    static TrainConfig desk();
    /// 30000 patches x 100 epochs at learning rate 1e-4.
    static TrainConfig paper();

    void validate(const ArchConfig& arch) const;
};

struct EpochRecord {
    int epoch = 0;
    double mean_loss = 0.0;
    double wall_seconds = 0.0;
};

/// Everything needed to continue training bit-exactly.
struct TrainingRun {
    NetworkParams params;
    AdamState optimizer;
    int epochs_completed = 0;
    double initial_loss = 0.0;
    std::vector<EpochRecord> log;
    NetworkParams best_params;
    double best_loss = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Per-patch loss of a network output. Returns loss and d loss / d output.
struct PatchLoss {
    double loss = 0.0;
    PlanarImage gradient;
};
PatchLoss patch_loss(const PatchPair& patch, const PlanarImage& output, const TrainConfig& config);

std::vector<PatchPair> build_patch_dataset(std::span<const LumaPair> pairs, const TrainConfig& config);

/// Forward, loss, backward, Adam per mini-batch; one log record per epoch.
TrainingRun train(const TrainConfig& config, std::span<const PatchPair> dataset,
                  const ArchConfig& arch, const EpochCallback& on_epoch = {});

/// Same loop for the L1 / L2 / SSIM losses against per-patch targets.
TrainingRun train_supervised(const TrainConfig& config, std::span<const PatchPair> dataset,
                             const ArchConfig& arch, const EpochCallback& on_epoch = {});

/// Continues `run` until config.epochs epochs have completed.
TrainingRun resume_training(const TrainConfig& config, std::span<const PatchPair> dataset,
                            TrainingRun run, const EpochCallback& on_epoch = {});

/// Mean loss of `params` over the dataset (no updates).
double evaluate_loss(const NetworkParams& params, std::span<const PatchPair> dataset,
                     const TrainConfig& config);

void save_training_state(const TrainingRun& run, const std::filesystem::path& path);
TrainingRun load_training_state(const std::filesystem::path& path);

/// One JSON object per line: {"epoch":..,"mean_loss":..,"wall_seconds":..}
void write_epoch_record(std::ostream& out, const EpochRecord& record);

}  // namespace deepfuse
