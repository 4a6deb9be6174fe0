// Deterministic seeded RNG for simulation and Monte Carlo runs.
// All randomness in the library flows through an explicit Rng instance or
// seed value; there is no global generator.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace gyrobs {

// splitmix64 step, used to derive independent stream seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Deterministic sub-seed for stream `index` of a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master ^ (0xD1B54A32D192ED03ULL * (index + 1));
    return splitmix64(s);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform in [0, 1) with 53-bit resolution. The mapping is fixed here
    // rather than delegated to std::uniform_real_distribution so that
    // sequences are identical across standard library implementations.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Standard normal via Box-Muller (two uniforms per sample, no caching,
    // so the draw count per sample is fixed).
    double gaussian() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double gaussian(double mean, double stddev) {
        return mean + stddev * gaussian();
    }

    std::uint64_t next_u64() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

}  // namespace gyrobs
