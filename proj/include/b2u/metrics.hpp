#pragma once

#include "b2u/tensor.hpp"

namespace b2u {

struct QualityScore {
    double psnr_db = 0.0;  ///< +inf when the images are identical after clamping
    double ssim = 0.0;
};

/// 10 log10(1 / MSE) with peak 1; both inputs clamped to [0, 1] first.
double psnr(const Tensor& reference, const Tensor& test);

/// Mean SSIM over the valid region of an 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, range 1. Channels and batch entries are averaged.
double ssim(const Tensor& reference, const Tensor& test);

inline QualityScore score(const Tensor& reference, const Tensor& test) {
    return {psnr(reference, test), ssim(reference, test)};
}

/// Elementwise clamp to [0, 1].
Tensor clamp01(const Tensor& t);

}  // namespace b2u
