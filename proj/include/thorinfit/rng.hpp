#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "thorinfit/errors.hpp"

namespace thorinfit {

/// Mixes a base seed with a stream index into an independent-looking
/// seed (SplitMix64 finalizer).  Used to give parallel repetitions
/// their own streams while keeping results independent of thread count.
[[nodiscard]] inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Deterministic random source.  All variate transforms are written out
/// here instead of using std::*_distribution so that a seed produces
/// the same stream on every platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    [[nodiscard]] std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    [[nodiscard]] double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform on (0, 1]; safe as a log argument.
    [[nodiscard]] double uniform01_open_low() { return 1.0 - uniform01(); }

    /// Standard normal via Box-Muller.  One variate per call, no cached
    /// spare, so the consumed engine state is predictable.
    [[nodiscard]] double normal() {
        const double u1 = uniform01_open_low();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    /// Gamma(shape, 1) via the Marsaglia-Tsang squeeze for shape >= 1,
    /// with the standard power boost below 1.  shape == 0 is the unit
    /// mass at zero.
    [[nodiscard]] double gamma(double shape) {
        if (shape < 0.0 || !std::isfinite(shape))
            throw data_error("gamma shape must be finite and nonnegative");
        if (shape == 0.0) return 0.0;
        if (shape < 1.0) {
            const double boost = std::pow(uniform01_open_low(), 1.0 / shape);
            return gamma_at_least_one(shape + 1.0) * boost;
        }
        return gamma_at_least_one(shape);
    }

private:
    [[nodiscard]] double gamma_at_least_one(double shape) {
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01_open_low();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    std::mt19937_64 engine_;
};

} // namespace thorinfit
