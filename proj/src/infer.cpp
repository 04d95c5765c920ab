#include "b2u/infer.hpp"

#include <cstdio>

#include "b2u/error.hpp"
#include "b2u/mapper.hpp"
#include "b2u/masking.hpp"
#include "b2u/objective.hpp"
#include "b2u/rng.hpp"

namespace b2u {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void check_input(const Checkpoint& ckpt, const Tensor& noisy) {
    if (noisy.empty()) throw ShapeError("n", "empty input image");
    if (noisy.shape().c != ckpt.net_config.in_channels) {
        throw ShapeError("c", "input has " + std::to_string(noisy.shape().c) +
                                  " channels, checkpoint expects " +
                                  std::to_string(ckpt.net_config.in_channels));
    }
}

// h(f(volume)) on an already padded batch.
Tensor blind_padded(const Checkpoint& ckpt, const Tensor& padded, MaskGridSpec grid) {
    const int layers = grid.layers();
    Tensor out(padded.shape());
    for (int b = 0; b < padded.shape().n; ++b) {
        const Tensor volume = make_global_masked_volume(padded.batch_slice(b, 1), grid).stacked();
        const Tensor denoised = unet_forward(ckpt.net_config, ckpt.params, volume);
        std::vector<Tensor> parts;
        parts.reserve(static_cast<std::size_t>(layers));
        for (int l = 0; l < layers; ++l) parts.push_back(denoised.batch_slice(l, 1));
        const Tensor mapped = map_blind_spots(parts, grid).image;
        std::copy(mapped.data().begin(), mapped.data().end(),
                  out.data().begin() + static_cast<std::ptrdiff_t>(out.offset(b, 0, 0, 0)));
    }
    return out;
}

}  // namespace

std::string_view to_string(InferMode mode) {
    switch (mode) {
        case InferMode::direct: return "direct";
        case InferMode::weighted: return "weighted";
        case InferMode::blind: return "blind";
    }
    return "?";
}

InferMode parse_infer_mode(std::string_view text) {
    if (text == "direct") return InferMode::direct;
    if (text == "weighted") return InferMode::weighted;
    if (text == "blind") return InferMode::blind;
    throw ConfigError("unknown mode '" + std::string(text) + "' (direct|weighted|blind)");
}

Tensor pad_replicate(const Tensor& image, int multiple) {
    const Shape s = image.shape();
    const int h = (s.h + multiple - 1) / multiple * multiple;
    const int w = (s.w + multiple - 1) / multiple * multiple;
    if (h == s.h && w == s.w) return image;
    Tensor out({s.n, s.c, h, w});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    out.at(n, c, y, x) = image.at(n, c, std::min(y, s.h - 1), std::min(x, s.w - 1));
    return out;
}

Tensor crop_top_left(const Tensor& image, int h, int w) {
    const Shape s = image.shape();
    if (h > s.h || w > s.w) throw ShapeError(h > s.h ? "h" : "w", "crop larger than image");
    if (h == s.h && w == s.w) return image;
    Tensor out({s.n, s.c, h, w});
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) out.at(n, c, y, x) = image.at(n, c, y, x);
    return out;
}

Tensor denoise_direct(const Checkpoint& ckpt, const Tensor& noisy) {
    check_input(ckpt, noisy);
    const Tensor padded = pad_replicate(noisy, ckpt.net_config.spatial_multiple());
    return crop_top_left(unet_forward(ckpt.net_config, ckpt.params, padded), noisy.shape().h,
                         noisy.shape().w);
}

Tensor denoise_blind(const Checkpoint& ckpt, const Tensor& noisy, int grid_s) {
    check_input(ckpt, noisy);
    const MaskGridSpec grid{grid_s};
    const Tensor padded = pad_replicate(noisy, ckpt.net_config.spatial_multiple());
    grid.validate(padded.shape().h, padded.shape().w);
    return crop_top_left(blind_padded(ckpt, padded, grid), noisy.shape().h, noisy.shape().w);
}

Tensor denoise_weighted(const Checkpoint& ckpt, const Tensor& noisy, double lambda, int grid_s) {
    if (!(lambda > 0.0)) throw ValueError("weighted inference needs lambda > 0");
    const Tensor blind = denoise_blind(ckpt, noisy, grid_s);
    const Tensor visible = denoise_direct(ckpt, noisy);
    return weighted_combination(blind, visible, lambda);
}

void EvalConfig::validate() const {
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (mode == InferMode::weighted && !(lambda > 0.0)) throw ConfigError("lambda must be > 0");
    if (grid_s < 2) throw ConfigError("grid_s must be >= 2");
    try {
        noise.validate();
    } catch (const ValueError& e) {
        throw ConfigError(e.what());
    }
}

Tensor denoise(const Checkpoint& ckpt, const Tensor& noisy, const EvalConfig& config) {
    switch (config.mode) {
        case InferMode::direct: return denoise_direct(ckpt, noisy);
        case InferMode::weighted: return denoise_weighted(ckpt, noisy, config.lambda, config.grid_s);
        case InferMode::blind: return denoise_blind(ckpt, noisy, config.grid_s);
    }
    return {};
}

std::uint64_t eval_seed(std::uint64_t seed, std::string_view name, int repeat) {
    return derive_seed({seed, fnv1a64(name), static_cast<std::uint64_t>(repeat)});
}

std::string EvalReport::tsv() const {
    char digest[32];
    std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(checkpoint_digest));
    std::string out = "# noise=" + noise + " mode=" + mode + " checkpoint=" + digest + '\n';
    out += "path\trepeat\tpsnr\tssim\n";
    for (const auto& e : entries) {
        out += e.path + '\t' + std::to_string(e.repeat) + '\t' + fmt(e.denoised.psnr_db) + '\t' +
               fmt(e.denoised.ssim) + '\n';
    }
    out += "mean\t-\t" + fmt(mean_psnr) + '\t' + fmt(mean_ssim) + '\n';
    return out;
}

EvalReport evaluate(const Checkpoint& ckpt, const std::vector<NamedImage>& clean,
                    const EvalConfig& config) {
    config.validate();
    if (clean.empty()) throw ValueError("evaluation set is empty");
    EvalReport report;
    report.noise = config.noise.str();
    report.mode = std::string(to_string(config.mode));
    if (config.mode == InferMode::weighted) report.mode += "(lambda=" + fmt(config.lambda) + ")";
    report.checkpoint_digest = checkpoint_digest(ckpt);
    for (const auto& img : clean) {
        for (int r = 0; r < config.repeats; ++r) {
            const Tensor noisy = corrupt(img.pixels, config.noise, eval_seed(config.seed, img.name, r)).noisy;
            const Tensor out = clamp01(denoise(ckpt, noisy, config));
            EvalEntry e;
            e.path = img.name;
            e.repeat = r;
            e.denoised = score(img.pixels, out);
            e.noisy = score(img.pixels, clamp01(noisy));
            report.entries.push_back(e);
        }
    }
    for (const auto& e : report.entries) {
        report.mean_psnr += e.denoised.psnr_db;
        report.mean_ssim += e.denoised.ssim;
        report.mean_noisy_psnr += e.noisy.psnr_db;
    }
    const double n = static_cast<double>(report.entries.size());
    report.mean_psnr /= n;
    report.mean_ssim /= n;
    report.mean_noisy_psnr /= n;
    return report;
}

EvalReport evaluate(const Checkpoint& ckpt, const DatasetManifest& clean_manifest,
                    const EvalConfig& config) {
    if (clean_manifest.size() == 0) throw ConfigError("evaluation manifest is empty");
    std::vector<NamedImage> images;
    images.reserve(clean_manifest.size());
    for (std::size_t i = 0; i < clean_manifest.size(); ++i) {
        images.push_back({clean_manifest.entries[i], read_image(clean_manifest.resolve(i)).pixels});
    }
    return evaluate(ckpt, images, config);
}

}  // namespace b2u
