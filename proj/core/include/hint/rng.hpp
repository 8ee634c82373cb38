#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hint {

// Deterministic RNG wrapper. All randomness in the project flows through
// this class so that runs are reproducible bit-for-bit on a given platform.
// Substreams are derived by hashing a label into the seed, which keeps
// independent consumers (init, data order, eval sampling) decoupled: adding
// draws to one stream never perturbs another.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    static Rng substream(std::uint64_t seed, std::string_view label);

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller (pairwise, spare cached).
    double normal();

    // Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi);

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace hint
