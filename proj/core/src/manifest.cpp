#include "hint/manifest.hpp"

#include "hint/errors.hpp"
#include "hint/hash.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace hint {

std::string RunManifest::content_hash() const {
    std::uint64_t h = fnv64(command);
    h = fnv64(config_text, h);
    h = fnv64(&seed, sizeof(seed), h);
    h = fnv64(input_fingerprint, h);
    return hex_u64(h);
}

std::string RunManifest::to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config_text;
    j["seed"] = seed;
    j["input_fingerprint"] = input_fingerprint;
    j["content_hash"] = content_hash();
    j["outputs"] = outputs;
    return j.dump(2) + "\n";
}

void RunManifest::write(const std::string& path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write manifest '" + path + "'");
    os << to_json();
    if (!os) throw DataError("failed writing manifest '" + path + "'");
}

std::uint64_t file_content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "' for hashing");
    std::stringstream buf;
    buf << in.rdbuf();
    std::string s = buf.str();
    return fnv64(s.data(), s.size());
}

} // namespace hint
