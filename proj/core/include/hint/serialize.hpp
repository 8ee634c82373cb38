#pragma once

#include "hint/tensor.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace hint {

// Single binary container used by checkpoints, exported module sets and the
// task cache: magic, format version, a JSON header (kind, metadata, array
// names and shapes), then raw little-endian f64 data in header order.
// Round-trips are bit-exact.
struct NamedArrayFile {
    std::string kind;
    std::string meta_json; // JSON object text
    std::vector<std::pair<std::string, Tensor>> arrays;
};

inline constexpr std::uint32_t array_file_version = 1;

void write_array_file(const std::string& path, const NamedArrayFile& file);
// Throws DataError on missing/corrupt/foreign files, with the reason named.
NamedArrayFile read_array_file(const std::string& path);

// Content hash over kind, array names, shapes and raw values (metadata is
// excluded so embedding the hash in the metadata stays well-defined).
std::uint64_t array_file_fingerprint(const NamedArrayFile& file);

} // namespace hint
