#pragma once

#include <cstdint>
#include <random>

#include "hsir/tensor.hpp"

namespace hsir {

/// Deterministic RNG. The engine (mt19937_64) is fully specified by the
/// standard; uniform/normal draws are implemented here rather than with
/// std::*_distribution so that streams are identical across standard
/// libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (hi <= lo) return lo;
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        // Rejection-free modulo is fine here: span << 2^64 so bias is negligible,
        // and determinism is the contract, not exact uniformity.
        return lo + static_cast<int64_t>(eng_() % span);
    }

    /// Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    void fill_normal(Tensor& t, double mean, double stddev) {
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = mean + stddev * normal();
    }

    void fill_uniform(Tensor& t, double lo, double hi) {
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = uniform(lo, hi);
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Stable stream derivation: mixes (seed, index) into a fresh seed so that
/// per-cube / per-sample streams are independent of processing order.
inline uint64_t derive_seed(uint64_t seed, uint64_t index) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace hsir
