#include "hint/checkpoint.hpp"

#include "hint/errors.hpp"
#include "hint/hash.hpp"
#include "hint/serialize.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>

namespace hint {

namespace {

using nlohmann::json;

std::vector<std::pair<std::string, Tensor>> collect_arrays(const TransformerModel& model,
                                                           const Hypernetwork& hyper) {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& [name, t] : model.named_parameters()) {
        out.emplace_back("model." + name, t);
    }
    for (const auto& [name, t] : hyper.named_parameters()) {
        out.emplace_back("hypernet." + name, t);
    }
    return out;
}

std::uint64_t arrays_fingerprint(const std::vector<std::pair<std::string, Tensor>>& arrays) {
    std::uint64_t h = fnv64_offset;
    for (const auto& [name, t] : arrays) {
        h = fnv64(name, h);
        h = fnv64(t.data(), t.size() * sizeof(double), h);
    }
    return h;
}

} // namespace

std::string checkpoint_fingerprint(const TransformerModel& model,
                                   const Hypernetwork& hyper) {
    return hex_u64(arrays_fingerprint(collect_arrays(model, hyper)));
}

void save_checkpoint(const std::string& path, const TransformerModel& model,
                     const Hypernetwork& hyper, const std::string& train_config_json,
                     const std::string& manifest_hash, int steps_taken) {
    NamedArrayFile file;
    file.kind = "checkpoint";
    file.arrays = collect_arrays(model, hyper);
    json meta;
    meta["model_config"] = json::parse(model_config_to_json(model.config));
    meta["train_config"] = train_config_json.empty()
                               ? json::object()
                               : json::parse(train_config_json);
    meta["has_generator"] = hyper.has_generator();
    meta["fingerprint"] = hex_u64(arrays_fingerprint(file.arrays));
    meta["manifest_hash"] = manifest_hash;
    meta["steps_taken"] = steps_taken;
    file.meta_json = meta.dump();
    write_array_file(path, file);
}

CheckpointData load_checkpoint_data(const std::string& path) {
    NamedArrayFile file = read_array_file(path);
    if (file.kind != "checkpoint") {
        throw DataError("'" + path + "': kind '" + file.kind + "', expected 'checkpoint'");
    }
    json meta = json::parse(file.meta_json, nullptr, false);
    if (meta.is_discarded()) throw DataError("'" + path + "': malformed metadata");
    CheckpointData ck;
    try {
        ck.model_config = model_config_from_json(meta.at("model_config").dump());
        ck.train_config_json = meta.at("train_config").dump();
        ck.has_generator = meta.at("has_generator").get<bool>();
        ck.fingerprint = meta.at("fingerprint").get<std::string>();
        ck.manifest_hash = meta.value("manifest_hash", "");
        ck.steps_taken = meta.value("steps_taken", 0);
    } catch (const json::exception& e) {
        throw DataError("'" + path + "': metadata field error: " + e.what());
    }
    ck.arrays = std::move(file.arrays);
    std::string actual = hex_u64(arrays_fingerprint(ck.arrays));
    if (actual != ck.fingerprint) {
        throw DataError("'" + path + "': fingerprint mismatch (stored " + ck.fingerprint +
                        ", computed " + actual + "); file is corrupt");
    }
    return ck;
}

void apply_checkpoint_arrays(const CheckpointData& ck, TransformerModel& model,
                             Hypernetwork& hyper) {
    std::map<std::string, Tensor> stored(ck.arrays.begin(), ck.arrays.end());
    auto fill = [&](const std::string& prefix,
                    const std::vector<std::pair<std::string, Tensor>>& params) {
        for (const auto& [name, t] : params) {
            auto it = stored.find(prefix + name);
            if (it == stored.end()) {
                throw DataError("checkpoint missing array '" + prefix + name + "'");
            }
            if (it->second.shape() != t.shape()) {
                throw DataError("checkpoint array '" + prefix + name + "' has shape " +
                                it->second.shape_str() + ", model expects " + t.shape_str());
            }
            Tensor dst = t;
            std::copy(it->second.data(), it->second.data() + it->second.size(), dst.data());
            stored.erase(it);
        }
    };
    fill("model.", model.named_parameters());
    fill("hypernet.", hyper.named_parameters());
    if (!stored.empty()) {
        throw DataError("checkpoint has unexpected array '" + stored.begin()->first + "'");
    }
}

} // namespace hint
