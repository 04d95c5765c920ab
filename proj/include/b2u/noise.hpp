#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "b2u/tensor.hpp"

namespace b2u {

enum class NoiseKind { gaussian_fixed, gaussian_range, poisson_fixed, poisson_range };

/// Synthetic corruption. Gaussian sigma is in 8-bit units (applied as sigma/255
/// on [0, 1] intensities); Poisson uses y = Poisson(rate * x) / rate.
/// Fixed kinds keep lo == hi.
struct NoiseSpec {
    NoiseKind kind = NoiseKind::gaussian_fixed;
    double lo = 25.0;
    double hi = 25.0;

    static NoiseSpec gaussian(double sigma_8bit) { return {NoiseKind::gaussian_fixed, sigma_8bit, sigma_8bit}; }
    static NoiseSpec gaussian(double lo, double hi) { return {NoiseKind::gaussian_range, lo, hi}; }
    static NoiseSpec poisson(double rate) { return {NoiseKind::poisson_fixed, rate, rate}; }
    static NoiseSpec poisson(double lo, double hi) { return {NoiseKind::poisson_range, lo, hi}; }

    /// Grammar: gauss<v> | gauss<lo>_<hi> | poisson<v> | poisson<lo>_<hi>.
    static NoiseSpec parse(std::string_view text);
    /// Inverse of parse().
    std::string str() const;

    bool is_gaussian() const noexcept {
        return kind == NoiseKind::gaussian_fixed || kind == NoiseKind::gaussian_range;
    }
    void validate() const;
    bool operator==(const NoiseSpec&) const = default;
};

inline constexpr std::string_view kNoiseGrammar =
    "gauss<sigma> | gauss<lo>_<hi> | poisson<rate> | poisson<lo>_<hi>  "
    "(e.g. gauss25, gauss5_50, poisson30, poisson5_50)";

struct Corrupted {
    Tensor noisy;
    /// sigma (8-bit units) or Poisson rate actually used.
    double parameter = 0.0;
};

/// Seeded, unclipped corruption of a [0, 1] image.
Corrupted corrupt(const Tensor& clean, const NoiseSpec& spec, std::uint64_t seed);

}  // namespace b2u
