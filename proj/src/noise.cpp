#include "b2u/noise.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "b2u/error.hpp"
#include "b2u/rng.hpp"

namespace b2u {

namespace {

double parse_number(std::string_view text, std::string_view whole) {
    double value = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (text.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
        throw ConfigError("invalid noise spec '" + std::string(whole) + "'; expected " +
                          std::string(kNoiseGrammar));
    }
    return value;
}

std::string format_number(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

// Knuth inversion by sequential search; exact for the small means it is used on.
double poisson_inversion(double mean, Rng& rng) {
    const double u = rng.uniform();
    double p = std::exp(-mean);
    double cdf = p;
    double k = 0.0;
    while (u > cdf && k < 1000.0) {
        k += 1.0;
        p *= mean / k;
        cdf += p;
        if (p == 0.0) break;
    }
    return k;
}

double poisson_sample(double mean, Rng& rng) {
    if (mean <= 0.0) return 0.0;
    if (mean < 30.0) return poisson_inversion(mean, rng);
    return std::max(0.0, std::round(mean + std::sqrt(mean) * rng.normal()));
}

}  // namespace

NoiseSpec NoiseSpec::parse(std::string_view text) {
    NoiseSpec spec;
    std::string_view rest;
    bool gaussian;
    if (text.starts_with("gauss")) {
        gaussian = true;
        rest = text.substr(5);
    } else if (text.starts_with("poisson")) {
        gaussian = false;
        rest = text.substr(7);
    } else {
        throw ConfigError("invalid noise spec '" + std::string(text) + "'; expected " +
                          std::string(kNoiseGrammar));
    }
    const auto sep = rest.find('_');
    if (sep == std::string_view::npos) {
        const double v = parse_number(rest, text);
        spec = gaussian ? NoiseSpec::gaussian(v) : NoiseSpec::poisson(v);
    } else {
        const double lo = parse_number(rest.substr(0, sep), text);
        const double hi = parse_number(rest.substr(sep + 1), text);
        if (lo > hi) {
            throw ConfigError("invalid noise spec '" + std::string(text) + "': lo > hi; expected " +
                              std::string(kNoiseGrammar));
        }
        spec = gaussian ? NoiseSpec::gaussian(lo, hi) : NoiseSpec::poisson(lo, hi);
    }
    try {
        spec.validate();
    } catch (const ValueError& e) {
        throw ConfigError("invalid noise spec '" + std::string(text) + "': " + e.what());
    }
    return spec;
}

std::string NoiseSpec::str() const {
    const std::string prefix = is_gaussian() ? "gauss" : "poisson";
    if (kind == NoiseKind::gaussian_fixed || kind == NoiseKind::poisson_fixed) {
        return prefix + format_number(lo);
    }
    return prefix + format_number(lo) + "_" + format_number(hi);
}

void NoiseSpec::validate() const {
    if (!(lo <= hi)) throw ValueError("noise range lo > hi");
    const bool fixed = kind == NoiseKind::gaussian_fixed || kind == NoiseKind::poisson_fixed;
    if (fixed && lo != hi) throw ValueError("fixed noise spec needs lo == hi");
    if (is_gaussian()) {
        if (!(lo >= 0.0)) throw ValueError("gaussian sigma must be >= 0");
    } else if (!(lo > 0.0)) {
        throw ValueError("poisson rate must be > 0");
    }
}

Corrupted corrupt(const Tensor& clean, const NoiseSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    const bool fixed = spec.kind == NoiseKind::gaussian_fixed || spec.kind == NoiseKind::poisson_fixed;
    const double param = fixed ? spec.lo : rng.uniform(spec.lo, spec.hi);
    Corrupted out{Tensor(clean.shape()), param};
    auto src = clean.data();
    auto dst = out.noisy.data();
    if (spec.is_gaussian()) {
        const double sigma = param / 255.0;
        for (std::size_t i = 0; i < src.size(); ++i) {
            dst[i] = static_cast<float>(src[i] + sigma * rng.normal());
        }
    } else {
        for (std::size_t i = 0; i < src.size(); ++i) {
            dst[i] = static_cast<float>(poisson_sample(param * src[i], rng) / param);
        }
    }
    return out;
}

}  // namespace b2u
