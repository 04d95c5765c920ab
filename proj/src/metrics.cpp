#include "b2u/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "b2u/error.hpp"

namespace b2u {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_taps() {
    std::array<double, kWindow> taps{};
    double total = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kWindow / 2;
        taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        total += taps[static_cast<std::size_t>(i)];
    }
    for (auto& t : taps) t /= total;
    return taps;
}

// Separable "valid" filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w,
                                 const std::array<double, kWindow>& taps) {
    const int oh = h - kWindow + 1;
    const int ow = w - kWindow + 1;
    std::vector<double> rows(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k)
                acc += taps[static_cast<std::size_t>(k)] * plane[static_cast<std::size_t>(y) * w + x + k];
            rows[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k)
                acc += taps[static_cast<std::size_t>(k)] * rows[static_cast<std::size_t>(y + k) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    return out;
}

double clamp_unit(float v) { return std::clamp(static_cast<double>(v), 0.0, 1.0); }

}  // namespace

Tensor clamp01(const Tensor& t) {
    Tensor out = t;
    for (float& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
    return out;
}

double psnr(const Tensor& reference, const Tensor& test) {
    require_same_shape(reference.shape(), test.shape(), "psnr");
    if (reference.numel() == 0) throw ShapeError("numel", "psnr of empty images");
    double acc = 0.0;
    for (std::size_t i = 0; i < reference.numel(); ++i) {
        const double d = clamp_unit(reference.data()[i]) - clamp_unit(test.data()[i]);
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(reference.numel());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Tensor& reference, const Tensor& test) {
    require_same_shape(reference.shape(), test.shape(), "ssim");
    const Shape s = reference.shape();
    if (s.h < kWindow) throw ShapeError("h", "ssim needs height >= 11, got " + s.str());
    if (s.w < kWindow) throw ShapeError("w", "ssim needs width >= 11, got " + s.str());
    const auto taps = gaussian_taps();
    const std::size_t plane = s.plane();
    double total = 0.0;
    int planes = 0;
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c) {
            std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
            const float* a = reference.ptr() + reference.offset(n, c, 0, 0);
            const float* b = test.ptr() + test.offset(n, c, 0, 0);
            for (std::size_t i = 0; i < plane; ++i) {
                x[i] = clamp_unit(a[i]);
                y[i] = clamp_unit(b[i]);
                xx[i] = x[i] * x[i];
                yy[i] = y[i] * y[i];
                xy[i] = x[i] * y[i];
            }
            const auto mx = filter_valid(x, s.h, s.w, taps);
            const auto my = filter_valid(y, s.h, s.w, taps);
            const auto mxx = filter_valid(xx, s.h, s.w, taps);
            const auto myy = filter_valid(yy, s.h, s.w, taps);
            const auto mxy = filter_valid(xy, s.h, s.w, taps);
            double acc = 0.0;
            for (std::size_t i = 0; i < mx.size(); ++i) {
                const double vx = mxx[i] - mx[i] * mx[i];
                const double vy = myy[i] - my[i] * my[i];
                const double cxy = mxy[i] - mx[i] * my[i];
                acc += ((2.0 * mx[i] * my[i] + kC1) * (2.0 * cxy + kC2)) /
                       ((mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2));
            }
            total += acc / static_cast<double>(mx.size());
            ++planes;
        }
    return planes == 0 ? 1.0 : total / planes;
}

}  // namespace b2u
