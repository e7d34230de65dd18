#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "tvcast/common.hpp"

namespace tvcast {

// SplitMix64 finalizer. Used to turn (master seed, stream index) pairs into
// well-separated engine seeds; never used as the sampling engine itself.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Seed for logical stream `stream` under `master`. Chains use stream = chain
// index, forecasting uses stream = draw index, and so on. Documented in the
// README so runs can be reproduced outside this codebase.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
}

// Deterministic sampling engine: mt19937_64 core (fully specified by the
// standard) with hand-rolled transforms, so draw sequences do not depend on
// the standard library's unspecified distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on (0, 1); never returns 0 or 1.
    double uniform() {
        const std::uint64_t bits = engine_() >> 11;  // 53 random bits
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller (one value per pair of uniforms).
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Gamma(shape, rate) via Marsaglia-Tsang; shape < 1 boosted through
    // Gamma(shape + 1) * U^(1/shape).
    double gamma(double shape, double rate) {
        require_numeric(shape > 0.0 && rate > 0.0, "gamma draw requires positive shape and rate");
        if (shape < 1.0) {
            const double u = uniform();
            return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
        }
    }

    // InverseGamma(shape, rate) with density proportional to
    // x^-(shape+1) * exp(-rate / x); the conjugate family for all variances.
    double inverse_gamma(double shape, double rate) { return 1.0 / gamma(shape, rate); }

    bool bernoulli(double p) { return uniform() < p; }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
};

}  // namespace tvcast
