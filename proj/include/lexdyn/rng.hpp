#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace lexdyn {

// Self-contained PRNG stack (splitmix64 seeding + xoshiro256**) so that every
// stochastic result is a pure function of (data, seed) independent of the
// standard library implementation. std::*_distribution is never used.

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    Rng() : Rng(0) {}

    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64_next(sm);
    }

    // Independent substream: hash-mixes (seed, stream) so per-month / per-draw
    // workers can run in any order and still be reproducible.
    static Rng derive(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t sm = seed ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL);
        return Rng(splitmix64_next(sm));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, n) via rejection sampling.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("next_below(0)");
        const std::uint64_t threshold = (-n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        const double u2 = next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    // Inverse-CDF binomial draw; exact for the moderate means used here.
    std::uint64_t next_binomial(std::uint64_t n, double p) {
        if (n == 0 || p <= 0.0) return 0;
        if (p >= 1.0) return n;
        const double u = next_double();
        const double odds = p / (1.0 - p);
        double pmf = std::exp(static_cast<double>(n) * std::log1p(-p));
        double cum = pmf;
        std::uint64_t k = 0;
        const double mean = static_cast<double>(n) * p;
        while (u > cum && k < n) {
            pmf *= odds * static_cast<double>(n - k) / static_cast<double>(k + 1);
            ++k;
            cum += pmf;
            if (pmf < 1e-300 && static_cast<double>(k) > mean) break;
        }
        return k;
    }

    // Geometric count of failures before success; mean (1-p)/p.
    std::uint64_t next_geometric(double p) {
        if (p >= 1.0) return 0;
        if (p <= 0.0) throw std::invalid_argument("next_geometric: p must be in (0,1]");
        double u = next_double();
        if (u <= 0.0) u = 0x1.0p-53;
        return static_cast<std::uint64_t>(std::floor(std::log(u) / std::log1p(-p)));
    }

    // Fisher-Yates over [0, n) index vectors.
    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a with a splitmix finalizer; fixed constants so that unit identities
// hash the same across shards, threads, and runs.
inline std::uint64_t stable_hash64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    std::uint64_t sm = h;
    return splitmix64_next(sm);
}

}  // namespace lexdyn
