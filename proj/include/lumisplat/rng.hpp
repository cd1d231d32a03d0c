#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace lumisplat {

// SplitMix64 generator. Self-contained so that streams are bit-identical
// across standard libraries and platforms.
class Rng {
   public:
    explicit Rng(uint64_t seed = 1) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t uniform_index(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // Box-Muller; one value per call, deterministic draw order.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    // Fisher-Yates with this generator's index draws.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent child stream.
    Rng fork(uint64_t tag) { return Rng(next_u64() ^ (tag * 0x9E3779B97F4A7C15ull)); }

   private:
    uint64_t state_;
};

}  // namespace lumisplat
