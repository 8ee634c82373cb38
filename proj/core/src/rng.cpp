#include "hint/rng.hpp"

#include "hint/errors.hpp"
#include "hint/hash.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

namespace hint {

std::string hex_u64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

Rng Rng::substream(std::uint64_t seed, std::string_view label) {
    std::uint64_t h = fnv64(&seed, sizeof(seed));
    h = fnv64(label, h);
    return Rng(h);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

int Rng::uniform_int(int lo, int hi) {
    if (lo > hi) throw ContractError("uniform_int: empty range");
    std::uint64_t range = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    return lo + static_cast<int>(next_u64() % range);
}

} // namespace hint
