#pragma once

#include <cstdint>
#include <cmath>

namespace nscope {

// SplitMix64 generator. Used everywhere instead of <random> engines so that
// every sampled value is identical across standard libraries and compilers;
// frozen artifacts (corpora, checkpoints, reports) depend on that.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n). Rejection-free Lemire reduction is overkill here;
    // 128-bit multiply keeps the bias below 2^-64.
    uint64_t next_below(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    int next_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(next_below(static_cast<uint64_t>(hi - lo + 1)));
    }

    double next_double() {  // [0, 1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Box-Muller, one value per call (the spare is discarded for simplicity).
    double next_gauss() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    uint64_t state_;
};

}  // namespace nscope
