// Seeded, splittable PRNG used by every stochastic component.
//
// All distributions are hand-rolled on top of splitmix64 so that a given
// (seed, call sequence) produces the same bits on every platform the
// simulator builds on. std::<random> distributions are implementation
// defined and would break the determinism contract.

#ifndef SKYLINK_RNG_HPP
#define SKYLINK_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string_view>

namespace skylink {

namespace detail {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// FNV-1a over a byte view, used for label hashing in seed derivation.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xCBF29CE484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}
} // namespace detail

// Derive an independent child seed from (master, label, index).
//
// This is the documented seed-derivation scheme: every module stream is
// hash(master_seed, module label, stream index), so a run is reproducible
// from the master seed alone regardless of scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                 std::uint64_t index = 0) {
    std::uint64_t h = detail::fnv1a(label);
    h ^= detail::mix64(master + detail::kGolden);
    h += detail::kGolden * (index + 1);
    return detail::mix64(h);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += detail::kGolden;
        return detail::mix64(state_);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + uniform() * (b - a); }

    bool bernoulli(double p) { return uniform() < p; }

    // Unbiased integer in [0, n) via Lemire's multiply-shift with rejection.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) return 0;
        while (true) {
            std::uint64_t x = next_u64();
            __uint128_t m = static_cast<__uint128_t>(x) * n;
            auto lo = static_cast<std::uint64_t>(m);
            if (lo >= n || lo >= (-n) % n) return static_cast<std::uint64_t>(m >> 64);
        }
    }

    // Standard normal via Box-Muller (cosine branch, no cached state so the
    // draw count per call is fixed).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Lognormal with the given linear-domain mean and normalized variance
    // (variance / mean^2).
    double lognormal_mean_nv(double mean, double normalized_variance) {
        if (normalized_variance <= 0.0) return mean;
        double s2 = std::log1p(normalized_variance);
        double mu = std::log(mean) - 0.5 * s2;
        return std::exp(mu + std::sqrt(s2) * normal());
    }

    // Poisson by inversion of the product of uniforms (Knuth). Fine for the
    // photon-number regime (mu of order 1); large mu falls back to a rounded
    // normal so the product never underflows.
    int poisson(double mu) {
        if (mu <= 0.0) return 0;
        if (mu > 50.0) {
            double x = normal(mu, std::sqrt(mu));
            return x < 0.0 ? 0 : static_cast<int>(std::lround(x));
        }
        double limit = std::exp(-mu);
        double prod = uniform();
        int n = 0;
        while (prod > limit) {
            prod *= uniform();
            ++n;
        }
        return n;
    }

    // Child generator for an independent labeled stream.
    Rng split(std::string_view label, std::uint64_t index = 0) const {
        return Rng(derive_seed(state_, label, index));
    }

private:
    std::uint64_t state_;
};

} // namespace skylink

#endif
