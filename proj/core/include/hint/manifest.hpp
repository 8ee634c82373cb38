#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hint {

// Reproducibility record for one CLI run. The content hash covers command,
// effective config, seed and input fingerprints; artifacts embed it (CSV
// comment line, checkpoint metadata), which chains outputs back to the run.
struct RunManifest {
    std::string command;
    std::string config_text; // rendered effective config
    std::uint64_t seed = 0;
    std::string input_fingerprint; // checkpoint or corpus hash, "" if none
    std::vector<std::string> outputs;

    std::string content_hash() const; // 16 hex chars
    std::string to_json() const;
    void write(const std::string& path) const;
};

std::uint64_t file_content_hash(const std::string& path); // DataError if unreadable

} // namespace hint
