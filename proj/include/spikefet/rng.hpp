#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace spikefet {

// Deterministic RNG. All mappings from raw engine output to values are
// hand-rolled so results are identical across standard libraries.
class Rng {
   public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n). n must be > 0; mt19937_64's period makes the
    // modulo bias negligible for the small n used here.
    int below(int n) { return static_cast<int>(gen_() % static_cast<uint64_t>(n)); }

    // Box-Muller, cached second draw.
    double normal() {
        if (has_cache_) {
            has_cache_ = false;
            return cache_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.28318530717958647692 * u2;
        cache_ = r * std::sin(a);
        has_cache_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Independent child stream (per sequence / per worker).
    Rng fork() { return Rng(gen_()); }

   private:
    std::mt19937_64 gen_;
    bool has_cache_ = false;
    double cache_ = 0.0;
};

}  // namespace spikefet
