// b2u: train, denoise, evaluate, synthesize noise, generate texture datasets.
//
// Exit codes: 0 success, 2 usage/config/input-format error, 3 runtime failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "b2u/error.hpp"
#include "b2u/image_io.hpp"
#include "b2u/infer.hpp"
#include "b2u/noise.hpp"
#include "b2u/run_config.hpp"
#include "b2u/textures.hpp"
#include "b2u/trainer.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

std::string default_value(std::string_view key) {
    const std::string text = b2u::TrainerConfig{}.canonical();
    const std::string prefix = std::string(key) + " = ";
    const auto at = text.find(prefix);
    const auto end = text.find('\n', at);
    return text.substr(at + prefix.size(), end - at - prefix.size());
}

std::string flag_name(std::string_view key) {
    std::string out = "--";
    for (char ch : key) out += ch == '_' ? '-' : ch;
    return out;
}

struct TrainArgs {
    std::string config;
    std::string data;
    std::string out;
    std::vector<std::string> sets;
};

int run_train(const TrainArgs& args, const std::map<std::string, CLI::Option*>& key_options) {
    b2u::TrainerConfig config;
    if (!args.config.empty()) config = b2u::load_run_config(args.config);
    for (const auto& s : args.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw b2u::ConfigError("--set expects key=value, got '" + s + "'");
        b2u::apply_setting(config, s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [key, opt] : key_options) {
        if (opt->count() > 0) b2u::apply_setting(config, key, opt->as<std::string>());
    }
    config.validate();
    const auto manifest = b2u::load_manifest(args.data);

    const std::filesystem::path out_dir = args.out;
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream echo(out_dir / "config.txt", std::ios::trunc);
        if (!echo) throw b2u::IoError((out_dir / "config.txt").string(), "cannot write config echo");
        echo << config.canonical();
    }
    b2u::TrainOptions options;
    options.out_dir = out_dir;
    options.on_step = [](const b2u::StepLog& log) {
        std::fprintf(stderr, "epoch %d step %ld total %.6f lambda %.3f lr %.3g\n", log.epoch,
                     log.step, log.total, log.lambda, log.lr);
    };
    const b2u::Checkpoint final_ckpt = b2u::train(manifest, config, options);
    std::printf("trained %d epochs; final checkpoint %s\n", final_ckpt.epoch,
                (out_dir / b2u::checkpoint_filename(final_ckpt.epoch)).string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Blind-spot self-supervised image denoiser"};
    app.require_subcommand(1);

    TrainArgs targs;
    auto* train = app.add_subcommand("train", "Train a denoiser on clean images corrupted on the fly");
    train->add_option("--config", targs.config, "Config file of 'key = value' lines");
    train->add_option("--data", targs.data, "Manifest of clean training images")->required();
    train->add_option("--out", targs.out, "Output directory for checkpoints and logs")->required();
    train->add_option("--set", targs.sets, "Extra key=value override (repeatable)");
    std::map<std::string, CLI::Option*> key_options;
    std::map<std::string, std::string> key_values;
    for (auto key : b2u::run_config_keys()) {
        auto& slot = key_values[std::string(key)];
        key_options[std::string(key)] =
            train->add_option(flag_name(key), slot, "Overrides config key '" + std::string(key) + "'")
                ->default_str(default_value(key));
    }

    std::string ckpt_path, input_path, output_path;
    bool weighted = false;
    double lambda = 20.0;
    int grid_s = 2;
    auto* denoise = app.add_subcommand("denoise", "Denoise one PGM/PPM image");
    denoise->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
    denoise->add_option("--input", input_path, "Noisy input image")->required();
    denoise->add_option("--output", output_path, "Denoised output image")->required();
    denoise->add_flag("--weighted", weighted, "Blend blind and direct outputs")->capture_default_str();
    denoise->add_option("--lambda", lambda, "Weight of the direct output in --weighted mode")->capture_default_str();
    denoise->add_option("--grid-s", grid_s, "Mask grid size for --weighted")->capture_default_str();

    std::string clean_manifest, noise_text = "gauss25", mode_text = "direct", report_path;
    int repeats = 1;
    std::uint64_t seed = 0;
    auto* eval = app.add_subcommand("eval", "Score a checkpoint on a clean image set");
    eval->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
    eval->add_option("--clean", clean_manifest, "Manifest of clean images")->required();
    eval->add_option("--noise", noise_text, std::string("Noise spec: ") + std::string(b2u::kNoiseGrammar))->capture_default_str();
    eval->add_option("--repeats", repeats, "Corrupted copies per image")->capture_default_str();
    eval->add_option("--mode", mode_text, "direct|weighted|blind")->capture_default_str();
    eval->add_option("--lambda", lambda, "Weight of the direct output in weighted mode")->capture_default_str();
    eval->add_option("--grid-s", grid_s, "Mask grid size for weighted/blind modes")->capture_default_str();
    eval->add_option("--seed", seed, "Corruption seed")->capture_default_str();
    eval->add_option("--report", report_path, "TSV report path")->required();

    auto* synth = app.add_subcommand("synth", "Corrupt one image with synthetic noise");
    synth->add_option("--input", input_path, "Clean input image")->required();
    synth->add_option("--noise", noise_text, std::string("Noise spec: ") + std::string(b2u::kNoiseGrammar))->capture_default_str();
    synth->add_option("--seed", seed, "Noise seed")->capture_default_str();
    synth->add_option("--output", output_path, "Noisy output image")->required();

    std::string tex_out;
    int tex_count = 20, tex_size = 64, tex_channels = 1;
    auto* textures = app.add_subcommand("textures", "Write a procedural texture dataset and manifest");
    textures->add_option("--out", tex_out, "Output directory")->required();
    textures->add_option("--count", tex_count, "Number of images")->capture_default_str();
    textures->add_option("--size", tex_size, "Image side length")->capture_default_str();
    textures->add_option("--channels", tex_channels, "1 (PGM) or 3 (PPM)")->capture_default_str();
    textures->add_option("--seed", seed, "Generator seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (train->parsed()) return run_train(targs, key_options);
        if (denoise->parsed()) {
            const auto ckpt = b2u::load_checkpoint(ckpt_path);
            const auto image = b2u::read_image(input_path);
            const b2u::Tensor out = weighted ? b2u::denoise_weighted(ckpt, image.pixels, lambda, grid_s)
                                             : b2u::denoise_direct(ckpt, image.pixels);
            b2u::write_image(output_path, b2u::ImageFile{out, image.bit_depth});
            return 0;
        }
        if (eval->parsed()) {
            b2u::EvalConfig config;
            config.noise = b2u::NoiseSpec::parse(noise_text);
            config.mode = b2u::parse_infer_mode(mode_text);
            config.repeats = repeats;
            config.lambda = lambda;
            config.grid_s = grid_s;
            config.seed = seed;
            config.validate();
            const auto ckpt = b2u::load_checkpoint(ckpt_path);
            const auto report = b2u::evaluate(ckpt, b2u::load_manifest(clean_manifest), config);
            std::ofstream out(report_path, std::ios::trunc);
            if (!out) throw b2u::IoError(report_path, "cannot write report");
            out << report.tsv();
            std::printf("mean psnr %.4f dB, mean ssim %.4f over %zu scores\n", report.mean_psnr,
                        report.mean_ssim, report.entries.size());
            return 0;
        }
        if (synth->parsed()) {
            const auto spec = b2u::NoiseSpec::parse(noise_text);
            spec.validate();
            const auto image = b2u::read_image(input_path);
            const auto corrupted = b2u::corrupt(image.pixels, spec, seed);
            b2u::write_image(output_path, b2u::ImageFile{corrupted.noisy, image.bit_depth});
            std::printf("%s parameter %.6g\n", spec.is_gaussian() ? "sigma" : "rate", corrupted.parameter);
            return 0;
        }
        if (textures->parsed()) {
            const auto manifest = b2u::write_texture_dataset(tex_out, tex_count, tex_size, tex_channels, seed);
            std::printf("%s\n", manifest.string().c_str());
            return 0;
        }
    } catch (const b2u::ConfigError& e) {
        std::fprintf(stderr, "b2u: error: %s\n", e.what());
        return kExitUsage;
    } catch (const b2u::FormatError& e) {
        std::fprintf(stderr, "b2u: error: %s\n", e.what());
        return kExitUsage;
    } catch (const b2u::IoError& e) {
        std::fprintf(stderr, "b2u: error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "b2u: error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
