#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "b2u/adam.hpp"
#include "b2u/checkpoint.hpp"
#include "b2u/image_io.hpp"
#include "b2u/noise.hpp"
#include "b2u/objective.hpp"
#include "b2u/unet.hpp"

namespace b2u {

/// Which objective a training step minimizes.
///   full / loss_case_a : global mask mapper + re-visible loss + regularizer
///   loss_case_b        : mapper + the cond<0 branch of the re-visible loss + regularizer
///   gm_only            : mapper, |h(f(volume)) - y|^2 only
///   rm_only            : one random blind spot per cell, loss on blind pixels only
///   rm_plus_v          : random mask + re-visible loss on blind pixels
enum class AblationMode { full, gm_only, rm_only, rm_plus_v, loss_case_a, loss_case_b };

std::string_view to_string(AblationMode mode);
AblationMode parse_ablation_mode(std::string_view text);

/// How often the visible weight moves along its ramp.
enum class LambdaGranularity { epoch, step };

std::string_view to_string(LambdaGranularity g);
LambdaGranularity parse_lambda_granularity(std::string_view text);

struct TrainerConfig {
    int epochs = 100;
    int batch_size = 4;
    double lr0 = 3e-4;
    double weight_decay = 1e-8;
    int grid_s = 2;
    int patch = 64;
    std::uint64_t seed = 0;
    NoiseSpec noise = NoiseSpec::gaussian(25.0);
    LossConfig loss;
    AblationMode ablation_mode = AblationMode::full;
    LambdaGranularity lambda_granularity = LambdaGranularity::epoch;
    NetConfig net;

    void validate() const;
    /// `loss` with total_epochs tied to `epochs`.
    LossConfig effective_loss() const;
    /// Stable "key = value" rendering of every field.
    std::string canonical() const;
    std::uint64_t digest() const;
};

/// One line of the training log.
struct StepLog {
    int epoch = 0;
    long step = 0;
    double total = 0.0;
    double rev = 0.0;
    double reg = 0.0;
    double lambda = 0.0;
    double lr = 0.0;

    /// epoch, step, total, rev, reg, lambda, lr; tab separated.
    std::string tsv() const;
};

/// Position of a step inside the whole run.
struct StepContext {
    int epoch = 0;
    long step = 0;         ///< global step index
    long total_steps = 1;  ///< steps in the full run
    std::uint64_t seed = 0;  ///< drives random masks
};

/// Weight of the visible term at this step under the configured granularity.
double scheduled_lambda(const TrainerConfig& config, const StepContext& ctx);

/// One optimisation step on a batch of noisy patches (n, c, p, p).
StepLog train_step(NetworkParams& params, AdamState& adam, const Tensor& noisy_batch,
                   const TrainerConfig& config, const StepContext& ctx);

struct TrainOptions {
    /// Where checkpoints and train_log.tsv go; empty keeps everything in memory.
    std::filesystem::path out_dir;
    /// Continue from this state; its epoch counter says how many epochs are done.
    std::optional<Checkpoint> resume;
    /// Stop once this many epochs are complete (0 = run all).
    int stop_after_epoch = 0;
    std::function<void(const StepLog&)> on_step;
};

/// Number of optimisation steps per epoch for a dataset of `images` entries.
long steps_per_epoch(std::size_t images, int batch_size);

/// Train on clean [0, 1] images, corrupting them on the fly. Every random
/// choice is derived from (seed, epoch, image index), so a resumed run
/// matches an uninterrupted one bit for bit.
Checkpoint train(const std::vector<Tensor>& clean_images, const TrainerConfig& config,
                 const TrainOptions& options = {});

/// Reads every manifest image, then trains as above. Checkpoints land in out_dir.
Checkpoint train(const DatasetManifest& manifest, const TrainerConfig& config,
                 const TrainOptions& options);

/// Corrupted training patch for (epoch, image index).
Tensor training_patch(const Tensor& clean, const TrainerConfig& config, int epoch,
                      std::size_t index);

/// Clean patch with the same crop as training_patch.
Tensor training_crop(const Tensor& clean, const TrainerConfig& config, int epoch,
                     std::size_t index);

/// Image order for one epoch (seeded shuffle).
std::vector<std::size_t> epoch_order(std::size_t images, std::uint64_t seed, int epoch);

std::string checkpoint_filename(int epoch);

}  // namespace b2u
