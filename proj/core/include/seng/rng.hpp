#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace seng {

// Mixes up to four values into one seed (splitmix64 finalizer per word).
// Used to derive independent streams from (run seed, step, layer, worker).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a = 0, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(base);
    h = mix(h ^ mix(a + 0x1234567));
    h = mix(h ^ mix(b + 0x89abcdef));
    h = mix(h ^ mix(c + 0xfedcba98));
    return h;
}

// Deterministic draws built on mt19937_64 raw output only; distribution
// shapes are computed here so results do not depend on the standard
// library's <random> distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    // [0, 1)
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    int uniform_int(int n) {
        return std::min(n - 1, int(uniform() * double(n)));
    }

    // Box–Muller, one cached value.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

private:
    std::mt19937_64 eng_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace seng
