#include "hint/serialize.hpp"

#include "hint/errors.hpp"
#include "hint/hash.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>

namespace hint {

namespace {

using nlohmann::json;

constexpr char magic[8] = {'H', 'I', 'N', 'T', 'B', 'I', 'N', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    os.write(buf, 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    os.write(buf, 8);
}

std::uint32_t read_u32(std::istream& is, const std::string& path) {
    char buf[4];
    if (!is.read(buf, 4)) throw DataError("'" + path + "': truncated header");
    std::uint32_t v;
    std::memcpy(&v, buf, 4);
    return v;
}

std::uint64_t read_u64(std::istream& is, const std::string& path) {
    char buf[8];
    if (!is.read(buf, 8)) throw DataError("'" + path + "': truncated header");
    std::uint64_t v;
    std::memcpy(&v, buf, 8);
    return v;
}

} // namespace

void write_array_file(const std::string& path, const NamedArrayFile& file) {
    json meta = json::object();
    if (!file.meta_json.empty()) {
        meta = json::parse(file.meta_json, nullptr, false);
        if (meta.is_discarded()) {
            throw ContractError("write_array_file: meta_json is not valid json");
        }
    }
    json header;
    header["kind"] = file.kind;
    header["meta"] = meta;
    header["arrays"] = json::array();
    for (const auto& [name, t] : file.arrays) {
        if (!t.defined()) {
            throw ContractError("write_array_file: undefined array '" + name + "'");
        }
        header["arrays"].push_back({{"name", name}, {"shape", t.shape()}});
    }
    std::string header_text = header.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    os.write(magic, sizeof(magic));
    write_u32(os, array_file_version);
    write_u64(os, header_text.size());
    os.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& [name, t] : file.arrays) {
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!os) throw DataError("failed writing '" + path + "'");
}

NamedArrayFile read_array_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open '" + path + "'");
    char m[8];
    if (!is.read(m, 8) || std::memcmp(m, magic, 8) != 0) {
        throw DataError("'" + path + "': bad magic, not an array container");
    }
    std::uint32_t version = read_u32(is, path);
    if (version != array_file_version) {
        throw DataError("'" + path + "': format version " + std::to_string(version) +
                        ", this build reads version " + std::to_string(array_file_version));
    }
    std::uint64_t header_len = read_u64(is, path);
    std::string header_text(header_len, '\0');
    if (!is.read(header_text.data(), static_cast<std::streamsize>(header_len))) {
        throw DataError("'" + path + "': truncated header");
    }
    json header = json::parse(header_text, nullptr, false);
    if (header.is_discarded()) throw DataError("'" + path + "': malformed header json");

    NamedArrayFile file;
    try {
        file.kind = header.at("kind").get<std::string>();
        file.meta_json = header.at("meta").dump();
        for (const auto& a : header.at("arrays")) {
            std::string name = a.at("name").get<std::string>();
            std::vector<int> shape = a.at("shape").get<std::vector<int>>();
            std::size_t n = 1;
            for (int d : shape) {
                if (d < 0) throw DataError("'" + path + "': negative dimension");
                n *= static_cast<std::size_t>(d);
            }
            std::vector<double> data(n);
            if (!is.read(reinterpret_cast<char*>(data.data()),
                         static_cast<std::streamsize>(n * sizeof(double)))) {
                throw DataError("'" + path + "': truncated data for array '" + name + "'");
            }
            file.arrays.emplace_back(name, Tensor::from_data(shape, std::move(data)));
        }
    } catch (const json::exception& e) {
        throw DataError("'" + path + "': header field error: " + e.what());
    }
    // Trailing bytes mean the file was not written by this code path.
    char extra;
    if (is.read(&extra, 1)) {
        throw DataError("'" + path + "': trailing bytes after array data");
    }
    return file;
}

std::uint64_t array_file_fingerprint(const NamedArrayFile& file) {
    std::uint64_t h = fnv64(file.kind);
    for (const auto& [name, t] : file.arrays) {
        h = fnv64(name, h);
        const auto& shape = t.shape();
        h = fnv64(shape.data(), shape.size() * sizeof(int), h);
        h = fnv64(t.data(), t.size() * sizeof(double), h);
    }
    return h;
}

} // namespace hint
