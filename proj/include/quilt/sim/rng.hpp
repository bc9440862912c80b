#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace quilt {

/// SplitMix64 step; used for seed derivation only.
std::uint64_t splitmix64(std::uint64_t& state);

/// Seed-splitting rule for replicate/block streams: the root seed and the
/// stream coordinates are folded through SplitMix64, so streams derived from
/// the same root with different coordinates are independent and reproducible.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0);

/// mt19937_64 stream with explicit float/normal/shuffle derivations, so the
/// produced sequences depend on the standardized engine only (no
/// implementation-defined distribution adapters).
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    double uniform01();                     // 53-bit uniform in [0, 1)
    double uniform(double lo, double hi);   // uniform in [lo, hi)
    double normal();                        // Box-Muller
    std::uint64_t below(std::uint64_t n);   // unbiased integer in [0, n)
    bool coin() { return (engine_() & 1u) != 0; }

    void shuffle(std::vector<int>& v);      // Fisher-Yates

private:
    std::mt19937_64 engine_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace quilt
