#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "b2u/checkpoint.hpp"
#include "b2u/image_io.hpp"
#include "b2u/metrics.hpp"
#include "b2u/noise.hpp"

namespace b2u {

/// Direct: f(y). Weighted: (h(f(volume)) + lambda f(y)) / (lambda + 1). Blind: h(f(volume)).
enum class InferMode { direct, weighted, blind };

std::string_view to_string(InferMode mode);
InferMode parse_infer_mode(std::string_view text);

/// Any input size works: the image is replicate-padded up to the network's
/// spatial multiple and the result cropped back. Output is not clamped.
Tensor denoise_direct(const Checkpoint& ckpt, const Tensor& noisy);

/// Output of the blind path alone: every pixel comes from the layer where it was hidden.
Tensor denoise_blind(const Checkpoint& ckpt, const Tensor& noisy, int grid_s);

Tensor denoise_weighted(const Checkpoint& ckpt, const Tensor& noisy, double lambda, int grid_s);

struct EvalConfig {
    NoiseSpec noise = NoiseSpec::gaussian(25.0);
    std::uint64_t seed = 0;
    int repeats = 1;
    InferMode mode = InferMode::direct;
    double lambda = 20.0;  ///< weighted mode only
    int grid_s = 2;        ///< weighted and blind modes

    void validate() const;
};

Tensor denoise(const Checkpoint& ckpt, const Tensor& noisy, const EvalConfig& config);

struct EvalEntry {
    std::string path;
    int repeat = 0;
    QualityScore denoised;
    QualityScore noisy;  ///< baseline: the corrupted input against clean
};

struct EvalReport {
    std::vector<EvalEntry> entries;  ///< manifest order, repeats innermost
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double mean_noisy_psnr = 0.0;
    std::string noise;
    std::string mode;
    std::uint64_t checkpoint_digest = 0;

    /// Header comment, "path repeat psnr ssim" rows, then an aggregate row.
    std::string tsv() const;
};

/// Corruption seed of one (image name, repeat) pair; independent of position.
std::uint64_t eval_seed(std::uint64_t seed, std::string_view name, int repeat);

struct NamedImage {
    std::string name;
    Tensor pixels;  ///< clean, (1, c, h, w)
};

EvalReport evaluate(const Checkpoint& ckpt, const std::vector<NamedImage>& clean,
                    const EvalConfig& config);

EvalReport evaluate(const Checkpoint& ckpt, const DatasetManifest& clean_manifest,
                    const EvalConfig& config);

/// Replicate-pad bottom and right so h and w become multiples of `multiple`.
Tensor pad_replicate(const Tensor& image, int multiple);

/// Top-left h x w window.
Tensor crop_top_left(const Tensor& image, int h, int w);

}  // namespace b2u
