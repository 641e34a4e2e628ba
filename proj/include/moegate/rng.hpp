#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace moegate {

// Deterministic RNG wrapper. All distributions are hand-rolled on top of
// mt19937 output so streams are reproducible bit-for-bit for a given
// (seed, stream) pair; std::*_distribution is implementation-defined and
// deliberately avoided.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        gen_.seed(seq);
    }

    std::uint32_t next_u32() { return gen_(); }

    // Uniform in [0,1) with 2^-53 resolution.
    double uniform() {
        const std::uint64_t hi = next_u32();
        const std::uint64_t lo = next_u32();
        return static_cast<double>(((hi << 32) | lo) >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    int uniform_int(int n) {
        return static_cast<int>((static_cast<std::uint64_t>(next_u32()) * static_cast<std::uint64_t>(n)) >> 32);
    }

    // Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) { return lo + uniform_int(hi - lo + 1); }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925287 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    template <class It>
    void shuffle(It begin, It end) {
        const auto n = static_cast<long long>(end - begin);
        for (long long i = n - 1; i > 0; --i) {
            const int j = uniform_int(static_cast<int>(i) + 1);
            std::swap(begin[i], begin[j]);
        }
    }

private:
    std::mt19937 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace moegate
