#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace hint {

// FNV-1a, 64-bit. Used for content hashes in manifests and for deriving
// named RNG substreams. Stable across platforms.
inline constexpr std::uint64_t fnv64_offset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t fnv64_prime = 0x100000001b3ULL;

inline std::uint64_t fnv64(const void* data, std::size_t len,
                           std::uint64_t seed = fnv64_offset) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= static_cast<std::uint64_t>(p[i]);
        h *= fnv64_prime;
    }
    return h;
}

inline std::uint64_t fnv64(std::string_view s, std::uint64_t seed = fnv64_offset) {
    return fnv64(s.data(), s.size(), seed);
}

// Exact match for string literals; without it, a literal plus seed would
// prefer the (void*, len) overload and read len bytes of garbage.
inline std::uint64_t fnv64(const char* s, std::uint64_t seed = fnv64_offset) {
    return fnv64(std::string_view(s), seed);
}

std::string hex_u64(std::uint64_t v);

} // namespace hint
