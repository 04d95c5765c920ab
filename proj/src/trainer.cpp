#include "b2u/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "b2u/error.hpp"
#include "b2u/mapper.hpp"
#include "b2u/masking.hpp"
#include "b2u/rng.hpp"

namespace b2u {

namespace {

enum : std::uint64_t { kTagInit = 1, kTagShuffle = 2, kTagCrop = 3, kTagNoise = 4, kTagMask = 5 };

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

Var masked_mean_square(Graph& g, Var diff, const Tensor& mask) {
    double count = 0.0;
    for (float m : mask.data()) count += m;
    return ops::scale(g, ops::sum(g, ops::mul(g, ops::square(g, diff), g.constant(mask))),
                      static_cast<float>(1.0 / count));
}

// Per-pixel mask (n, 1, h, w) broadcast over c channels.
Tensor expand_mask(const std::vector<Tensor>& masks, int channels) {
    const Shape s = masks.front().shape();
    Tensor out({static_cast<int>(masks.size()), channels, s.h, s.w});
    for (std::size_t b = 0; b < masks.size(); ++b)
        for (int c = 0; c < channels; ++c)
            for (int y = 0; y < s.h; ++y)
                for (int x = 0; x < s.w; ++x)
                    out.at(static_cast<int>(b), c, y, x) = masks[b].at(0, 0, y, x);
    return out;
}

}  // namespace

std::string_view to_string(AblationMode mode) {
    switch (mode) {
        case AblationMode::full: return "full";
        case AblationMode::gm_only: return "gm_only";
        case AblationMode::rm_only: return "rm_only";
        case AblationMode::rm_plus_v: return "rm_plus_v";
        case AblationMode::loss_case_a: return "loss_case_a";
        case AblationMode::loss_case_b: return "loss_case_b";
    }
    return "?";
}

AblationMode parse_ablation_mode(std::string_view text) {
    for (auto m : {AblationMode::full, AblationMode::gm_only, AblationMode::rm_only,
                   AblationMode::rm_plus_v, AblationMode::loss_case_a, AblationMode::loss_case_b}) {
        if (text == to_string(m)) return m;
    }
    throw ConfigError("unknown ablation_mode '" + std::string(text) +
                      "' (full|gm_only|rm_only|rm_plus_v|loss_case_a|loss_case_b)");
}

std::string_view to_string(LambdaGranularity g) {
    return g == LambdaGranularity::epoch ? "epoch" : "step";
}

LambdaGranularity parse_lambda_granularity(std::string_view text) {
    if (text == "epoch") return LambdaGranularity::epoch;
    if (text == "step") return LambdaGranularity::step;
    throw ConfigError("unknown lambda_granularity '" + std::string(text) + "' (epoch|step)");
}

void TrainerConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr0 > 0.0)) throw ConfigError("lr0 must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (grid_s < 2) throw ConfigError("grid_s must be >= 2");
    if (patch < grid_s) throw ConfigError("patch must be >= grid_s");
    try {
        net.validate();
        effective_loss().validate();
        noise.validate();
    } catch (const ValueError& e) {
        throw ConfigError(e.what());
    }
    if (patch % net.spatial_multiple() != 0) {
        throw ConfigError("patch " + std::to_string(patch) + " must be a multiple of " +
                          std::to_string(net.spatial_multiple()) + " for depth " +
                          std::to_string(net.depth));
    }
    const bool random_mask =
        ablation_mode == AblationMode::rm_only || ablation_mode == AblationMode::rm_plus_v;
    if (random_mask && patch % grid_s != 0) {
        throw ConfigError("random-mask modes need patch divisible by grid_s");
    }
}

LossConfig TrainerConfig::effective_loss() const {
    LossConfig l = loss;
    l.total_epochs = epochs;
    return l;
}

std::string TrainerConfig::canonical() const {
    std::ostringstream os;
    os << "epochs = " << epochs << '\n'
       << "batch_size = " << batch_size << '\n'
       << "lr0 = " << fmt(lr0) << '\n'
       << "weight_decay = " << fmt(weight_decay) << '\n'
       << "grid_s = " << grid_s << '\n'
       << "patch = " << patch << '\n'
       << "seed = " << seed << '\n'
       << "noise = " << noise.str() << '\n'
       << "eta = " << fmt(loss.eta) << '\n'
       << "lambda_s = " << fmt(loss.lambda_s) << '\n'
       << "lambda_f = " << fmt(loss.lambda_f) << '\n'
       << "ablation_mode = " << to_string(ablation_mode) << '\n'
       << "lambda_granularity = " << to_string(lambda_granularity) << '\n'
       << "in_channels = " << net.in_channels << '\n'
       << "base_channels = " << net.base_channels << '\n'
       << "depth = " << net.depth << '\n'
       << "leaky_slope = " << fmt(net.leaky_slope) << '\n';
    return os.str();
}

std::uint64_t TrainerConfig::digest() const { return fnv1a64(canonical()); }

std::string StepLog::tsv() const {
    return std::to_string(epoch) + '\t' + std::to_string(step) + '\t' + fmt(total) + '\t' +
           fmt(rev) + '\t' + fmt(reg) + '\t' + fmt(lambda) + '\t' + fmt(lr);
}

double scheduled_lambda(const TrainerConfig& config, const StepContext& ctx) {
    const LossConfig loss = config.effective_loss();
    if (config.lambda_granularity == LambdaGranularity::step) {
        return lambda_at_step(loss, ctx.step, ctx.total_steps);
    }
    return lambda_at(loss, ctx.epoch);
}

StepLog train_step(NetworkParams& params, AdamState& adam, const Tensor& noisy_batch,
                   const TrainerConfig& config, const StepContext& ctx) {
    const MaskGridSpec grid{config.grid_s};
    const double lambda = scheduled_lambda(config, ctx);
    const double lr = lr_at_epoch(config.lr0, ctx.epoch);
    const double eta = config.loss.eta;
    const int batch = noisy_batch.shape().n;

    Graph g;
    const auto handles = register_parameters(g, params);
    Var target = g.constant(noisy_batch);
    StepLog log{ctx.epoch, ctx.step, 0.0, 0.0, 0.0, lambda, lr};
    Var total;

    switch (config.ablation_mode) {
        case AblationMode::full:
        case AblationMode::loss_case_a:
        case AblationMode::loss_case_b:
        case AblationMode::gm_only: {
            Var volume = g.constant(make_volume_batch(noisy_batch, grid));
            Var denoised = unet_forward(g, config.net, handles, volume, true);
            Var blind = ops::map_blind_spots(g, denoised, grid);
            if (config.ablation_mode == AblationMode::gm_only) {
                total = ops::mean(g, ops::square(g, ops::sub(g, blind, target)));
                log.rev = g.value(total).item();
                break;
            }
            Var visible = unet_forward(g, config.net, handles, target, false);
            if (config.ablation_mode == AblationMode::loss_case_b) {
                Var rev = loss_case_b(g, blind, visible, target, lambda);
                Var reg = ops::mean(g, ops::square(g, ops::sub(g, blind, target)));
                total = ops::weighted_sum(g, rev, 1.0f, reg, static_cast<float>(eta));
                log.rev = g.value(rev).item();
                log.reg = g.value(reg).item();
            } else {
                const LossBreakdown loss = revisible_loss(g, blind, visible, target, lambda, eta);
                total = loss.total;
                log.rev = loss.rev_value;
                log.reg = loss.reg_value;
            }
            break;
        }
        case AblationMode::rm_only:
        case AblationMode::rm_plus_v: {
            std::vector<Tensor> images;
            std::vector<Tensor> masks;
            for (int b = 0; b < batch; ++b) {
                auto masked = make_random_masked_image(
                    noisy_batch.batch_slice(b, 1), grid,
                    derive_seed({ctx.seed, kTagMask, static_cast<std::uint64_t>(b)}));
                images.push_back(std::move(masked.image));
                masks.push_back(std::move(masked.mask));
            }
            const Tensor mask = expand_mask(masks, noisy_batch.shape().c);
            Var input = g.constant(concat_batch(images));
            Var blind = unet_forward(g, config.net, handles, input, true);
            Var reg = masked_mean_square(g, ops::sub(g, blind, target), mask);
            if (config.ablation_mode == AblationMode::rm_only) {
                total = reg;
                log.rev = g.value(reg).item();
                break;
            }
            Var visible = unet_forward(g, config.net, handles, target, false);
            Var mixed = ops::weighted_sum(g, visible, static_cast<float>(lambda), target,
                                          static_cast<float>(-(lambda + 1.0)));
            Var rev = masked_mean_square(g, ops::add(g, blind, mixed), mask);
            total = ops::weighted_sum(g, rev, 1.0f, reg, static_cast<float>(eta));
            log.rev = g.value(rev).item();
            log.reg = g.value(reg).item();
            break;
        }
    }
    log.total = g.value(total).item();
    const GradientMap grads = g.backward(total);
    adam_step(params, grads, adam, lr, config.weight_decay);
    return log;
}

long steps_per_epoch(std::size_t images, int batch_size) {
    return static_cast<long>((images + static_cast<std::size_t>(batch_size) - 1) /
                             static_cast<std::size_t>(batch_size));
}

std::vector<std::size_t> epoch_order(std::size_t images, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(images);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed({seed, kTagShuffle, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = images; i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
    return order;
}

Tensor training_crop(const Tensor& clean, const TrainerConfig& config, int epoch,
                     std::size_t index) {
    return crop_patch(clean, config.patch,
                      derive_seed({config.seed, kTagCrop, static_cast<std::uint64_t>(epoch), index}));
}

Tensor training_patch(const Tensor& clean, const TrainerConfig& config, int epoch,
                      std::size_t index) {
    return corrupt(training_crop(clean, config, epoch, index), config.noise,
                   derive_seed({config.seed, kTagNoise, static_cast<std::uint64_t>(epoch), index}))
        .noisy;
}

std::string checkpoint_filename(int epoch) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "checkpoint_epoch_%04d.b2u", epoch);
    return buf;
}

Checkpoint train(const std::vector<Tensor>& clean_images, const TrainerConfig& config,
                 const TrainOptions& options) {
    config.validate();
    if (clean_images.empty()) throw ValueError("training set is empty");
    for (const auto& img : clean_images) {
        if (img.shape().n != 1) throw ShapeError("n", "training images must be single images");
        if (img.shape().c != config.net.in_channels) {
            throw ShapeError("c", "image has " + std::to_string(img.shape().c) +
                                      " channels, network expects " +
                                      std::to_string(config.net.in_channels));
        }
    }

    Checkpoint ckpt;
    if (options.resume) {
        ckpt = *options.resume;
        if (!(ckpt.net_config == config.net)) {
            throw ConfigError("resume checkpoint network config differs from the training config");
        }
    } else {
        ckpt.net_config = config.net;
        ckpt.params = build_unet(config.net, derive_seed({config.seed, kTagInit}));
    }
    ckpt.trainer_config_digest = config.digest();

    std::ofstream log_file;
    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir);
        const auto log_path = options.out_dir / "train_log.tsv";
        log_file.open(log_path, options.resume ? std::ios::app : std::ios::trunc);
        if (!log_file) throw IoError(log_path.string(), "cannot open training log");
    }

    const long per_epoch = steps_per_epoch(clean_images.size(), config.batch_size);
    const long total_steps = per_epoch * config.epochs;
    const int last_epoch = options.stop_after_epoch > 0
                               ? std::min(options.stop_after_epoch, config.epochs)
                               : config.epochs;
    for (int epoch = ckpt.epoch; epoch < last_epoch; ++epoch) {
        const auto order = epoch_order(clean_images.size(), config.seed, epoch);
        for (long b = 0; b < per_epoch; ++b) {
            const std::size_t first = static_cast<std::size_t>(b) * config.batch_size;
            const std::size_t last = std::min(order.size(), first + config.batch_size);
            std::vector<Tensor> patches;
            for (std::size_t i = first; i < last; ++i) {
                patches.push_back(training_patch(clean_images[order[i]], config, epoch, order[i]));
            }
            StepContext ctx;
            ctx.epoch = epoch;
            ctx.step = epoch * per_epoch + b;
            ctx.total_steps = total_steps;
            ctx.seed = derive_seed({config.seed, kTagMask, static_cast<std::uint64_t>(ctx.step)});
            const StepLog log = train_step(ckpt.params, ckpt.adam, concat_batch(patches), config, ctx);
            if (log_file.is_open()) log_file << log.tsv() << '\n';
            if (options.on_step) options.on_step(log);
        }
        ckpt.epoch = epoch + 1;
        if (!options.out_dir.empty()) {
            log_file.flush();
            save_checkpoint(options.out_dir / checkpoint_filename(ckpt.epoch), ckpt);
        }
    }
    return ckpt;
}

Checkpoint train(const DatasetManifest& manifest, const TrainerConfig& config,
                 const TrainOptions& options) {
    if (manifest.size() == 0) throw ConfigError("training manifest is empty");
    std::vector<Tensor> images;
    images.reserve(manifest.size());
    for (std::size_t i = 0; i < manifest.size(); ++i) images.push_back(read_image(manifest.resolve(i)).pixels);
    return train(images, config, options);
}

}  // namespace b2u
