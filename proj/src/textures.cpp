#include "b2u/textures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "b2u/error.hpp"
#include "b2u/image_io.hpp"
#include "b2u/rng.hpp"

namespace b2u {

Tensor make_texture(int height, int width, int channels, std::uint64_t seed) {
    if (height < 1 || width < 1 || channels < 1) throw ValueError("texture size must be positive");
    Rng rng(seed);
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    struct Wave { double fx, fy, phase, amp; };
    struct Step { double nx, ny, offset, softness, amp; };
    std::vector<Wave> waves(3);
    for (auto& wv : waves) {
        const double angle = rng.uniform(0.0, kTwoPi);
        const double cycles = rng.uniform(1.0, 4.0);
        wv = {std::cos(angle) * cycles, std::sin(angle) * cycles, rng.uniform(0.0, kTwoPi),
              rng.uniform(0.3, 1.0)};
    }
    std::vector<Step> steps(3);
    for (auto& st : steps) {
        const double angle = rng.uniform(0.0, kTwoPi);
        st = {std::cos(angle), std::sin(angle), rng.uniform(-0.3, 0.3), rng.uniform(0.01, 0.05),
              rng.uniform(-1.0, 1.0)};
    }
    std::vector<double> tint(static_cast<std::size_t>(channels));
    for (auto& t : tint) t = rng.uniform(0.7, 1.0);

    std::vector<double> field(static_cast<std::size_t>(height) * width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double u = (x + 0.5) / width - 0.5;
            const double v = (y + 0.5) / height - 0.5;
            double f = 0.0;
            for (const auto& wv : waves) f += wv.amp * std::sin(kTwoPi * (wv.fx * u + wv.fy * v) + wv.phase);
            for (const auto& st : steps) f += st.amp * std::tanh((st.nx * u + st.ny * v - st.offset) / st.softness);
            field[static_cast<std::size_t>(y) * width + x] = f;
        }
    }
    const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
    const double span = std::max(*hi - *lo, 1e-12);
    Tensor out({1, channels, height, width});
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const double t = (field[static_cast<std::size_t>(y) * width + x] - *lo) / span;
                const double shade = channels == 1 ? t : t * tint[static_cast<std::size_t>(c)];
                out.at(0, c, y, x) = static_cast<float>(0.1 + 0.8 * shade);
            }
        }
    }
    return out;
}

std::vector<Tensor> make_texture_set(int count, int size, int channels, std::uint64_t seed) {
    std::vector<Tensor> out;
    out.reserve(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) {
        out.push_back(make_texture(size, size, channels, derive_seed({seed, static_cast<std::uint64_t>(i)})));
    }
    return out;
}

std::filesystem::path write_texture_dataset(const std::filesystem::path& dir, int count, int size,
                                            int channels, std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    const auto manifest = dir / "manifest.txt";
    std::ofstream list(manifest, std::ios::trunc);
    if (!list) throw IoError(manifest.string(), "cannot write manifest");
    const auto images = make_texture_set(count, size, channels, seed);
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "tex_%04d.%s", i, channels == 1 ? "pgm" : "ppm");
        write_image(dir / name, ImageFile{images[static_cast<std::size_t>(i)], 8});
        list << name << '\n';
    }
    return manifest;
}

}  // namespace b2u
