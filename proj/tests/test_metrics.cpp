#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "b2u/error.hpp"
#include "b2u/metrics.hpp"
#include "b2u/noise.hpp"
#include "helpers.hpp"

using namespace b2u;
using b2u::test::random_tensor;

namespace {

double psnr_oracle(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double x = std::clamp<double>(a.data()[i], 0.0, 1.0);
        const double y = std::clamp<double>(b.data()[i], 0.0, 1.0);
        acc += (x - y) * (x - y);
    }
    return 10.0 * std::log10(1.0 / (acc / static_cast<double>(a.numel())));
}

// Every 11x11 window evaluated directly with the normalized 2-D Gaussian.
double ssim_oracle(const Tensor& a, const Tensor& b) {
    constexpr int kWin = 11;
    std::vector<double> g1(kWin);
    double total = 0.0;
    for (int i = 0; i < kWin; ++i) {
        g1[static_cast<std::size_t>(i)] = std::exp(-((i - 5) * (i - 5)) / (2.0 * 1.5 * 1.5));
        total += g1[static_cast<std::size_t>(i)];
    }
    for (auto& v : g1) v /= total;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const Shape s = a.shape();
    double sum = 0.0;
    int count = 0;
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c) {
            double plane = 0.0;
            int windows = 0;
            for (int y0 = 0; y0 + kWin <= s.h; ++y0)
                for (int x0 = 0; x0 + kWin <= s.w; ++x0) {
                    double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                    for (int dy = 0; dy < kWin; ++dy)
                        for (int dx = 0; dx < kWin; ++dx) {
                            const double w = g1[static_cast<std::size_t>(dy)] * g1[static_cast<std::size_t>(dx)];
                            const double x = std::clamp<double>(a.at(n, c, y0 + dy, x0 + dx), 0.0, 1.0);
                            const double y = std::clamp<double>(b.at(n, c, y0 + dy, x0 + dx), 0.0, 1.0);
                            mx += w * x;
                            my += w * y;
                            sxx += w * x * x;
                            syy += w * y * y;
                            sxy += w * x * y;
                        }
                    const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
                    plane += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                    ++windows;
                }
            sum += plane / windows;
            ++count;
        }
    return sum / count;
}

}  // namespace

TEST_CASE("psnr") {
    const Tensor a = random_tensor({1, 1, 16, 16}, 1, 0.0, 1.0);
    CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());

    // 0 + 0.1f is exact in float; the only error left is 0.1f != 0.1.
    const Tensor zero({1, 3, 16, 16});
    const Tensor offset({1, 3, 16, 16}, 0.1f);
    CHECK(std::abs(psnr(zero, offset) - 20.0) <= 1e-6);

    const Tensor b = random_tensor({2, 3, 16, 16}, 2, -0.2, 1.2);
    const Tensor c = random_tensor({2, 3, 16, 16}, 3, 0.0, 1.0);
    CHECK(std::abs(psnr(c, b) - psnr_oracle(c, b)) <= 1e-6);
    CHECK_THROWS_AS(psnr(a, Tensor({1, 1, 16, 15})), ShapeError);
}

TEST_CASE("psnr decreases with noise amplitude") {
    const Tensor x({1, 1, 64, 64}, 0.5f);
    double prev = std::numeric_limits<double>::infinity();
    for (double sigma : {5.0, 15.0, 30.0}) {
        const double p = psnr(x, corrupt(x, NoiseSpec::gaussian(sigma), 4).noisy);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("ssim") {
    const Tensor a = random_tensor({1, 2, 24, 20}, 5, 0.0, 1.0);
    CHECK(std::abs(ssim(a, a) - 1.0) <= 1e-9);

    const Tensor b = random_tensor({1, 2, 24, 20}, 6, 0.0, 1.0);
    CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) <= 1e-5);
    CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-9);

    Tensor smooth = a;
    for (std::size_t i = 0; i < smooth.numel(); ++i) smooth.data()[i] = 0.5f * a.data()[i] + 0.5f * b.data()[i];
    CHECK(std::abs(ssim(a, smooth) - ssim_oracle(a, smooth)) <= 1e-5);

    // Pattern and its reflection about the mean are anticorrelated.
    const Tensor p = random_tensor({1, 1, 16, 16}, 7, -0.3, 0.3);
    Tensor up(p.shape()), down(p.shape());
    for (std::size_t i = 0; i < p.numel(); ++i) {
        up.data()[i] = 0.5f + p.data()[i];
        down.data()[i] = 0.5f - p.data()[i];
    }
    CHECK(ssim(up, down) < 0.0);

    CHECK_THROWS_AS(ssim(Tensor({1, 1, 10, 20}), Tensor({1, 1, 10, 20})), ShapeError);
    CHECK_THROWS_AS(ssim(a, Tensor({1, 2, 24, 21})), ShapeError);
}

TEST_CASE("score and clamp") {
    const Tensor a = random_tensor({1, 1, 16, 16}, 8, -0.5, 1.5);
    const Tensor c = clamp01(a);
    for (float v : c.data()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    const QualityScore s = score(c, a);
    CHECK(s.psnr_db == std::numeric_limits<double>::infinity());
    CHECK(std::abs(s.ssim - 1.0) <= 1e-9);
}
