#include "hint/task_cache.hpp"

#include "hint/errors.hpp"
#include "hint/serialize.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>

namespace hint {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void check_task_id(const std::string& task_id) {
    if (task_id.empty()) throw DataError("task cache: empty task id");
    for (char c : task_id) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
        if (!ok) {
            throw DataError("task cache: task id '" + task_id +
                            "' contains characters unsafe for filenames");
        }
    }
}

// PeftSet arrays are flat name -> tensor pairs; rebuild the structure by
// parsing "layerNN.group.part".
PeftSet rebuild_peft(const std::vector<std::pair<std::string, Tensor>>& arrays,
                     const ModelConfig& mc) {
    PeftSet set;
    set.kind_flags = mc.kinds;
    set.per_layer.resize(static_cast<std::size_t>(2 * mc.layers));
    for (const auto& [name, t] : arrays) {
        unsigned layer = 0;
        char group[32] = {0};
        char part[32] = {0};
        if (std::sscanf(name.c_str(), "layer%2u.%31[^.].%31s", &layer, group, part) != 3) {
            continue; // not a module array (e.g. encoded_instruction)
        }
        if (static_cast<int>(layer) >= 2 * mc.layers) {
            throw DataError("task cache: array '" + name + "' addresses layer " +
                            std::to_string(layer) + " but model has " +
                            std::to_string(2 * mc.layers));
        }
        auto& la = set.per_layer[layer];
        std::string g(group), p(part);
        if (g == "adapter") {
            if (!la.adapter) la.adapter = AdapterPair{};
            (p == "down" ? la.adapter->down : la.adapter->up) = t;
        } else if (g == "prefix_self") {
            if (!la.self_prefix) la.self_prefix = PrefixPair{};
            (p == "keys" ? la.self_prefix->keys : la.self_prefix->values) = t;
        } else if (g == "prefix_cross") {
            if (!la.cross_prefix) la.cross_prefix = PrefixPair{};
            (p == "keys" ? la.cross_prefix->keys : la.cross_prefix->values) = t;
        } else if (g == "lora") {
            if (!la.lora) la.lora = LoraSet{};
            if (p == "q_a") la.lora->q.a = t;
            else if (p == "q_b") la.lora->q.b = t;
            else if (p == "v_a") la.lora->v.a = t;
            else if (p == "v_b") la.lora->v.b = t;
            else throw DataError("task cache: unknown lora part '" + name + "'");
        } else {
            throw DataError("task cache: unknown array group '" + name + "'");
        }
    }
    return set;
}

} // namespace

TaskCache::TaskCache(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DataError("task cache: cannot create directory '" + dir_ + "'");
}

std::string TaskCache::path_for(const std::string& task_id) const {
    return (fs::path(dir_) / (task_id + ".ctx")).string();
}

std::string TaskCache::put(const TaskContext& ctx, const ModelConfig& mc,
                           const std::string& checkpoint_fingerprint) {
    check_task_id(ctx.task_id);
    if (ctx.encoded_instruction.length() == 0) {
        throw DataError("task cache: context for '" + ctx.task_id +
                        "' has no encoded instruction");
    }
    NamedArrayFile file;
    file.kind = "task_context";
    file.arrays.emplace_back("encoded_instruction", ctx.encoded_instruction.states.detach());
    if (ctx.has_peft) {
        for (const auto& [name, t] : ctx.peft.named_arrays()) {
            file.arrays.emplace_back(name, t.detach());
        }
    }
    json meta;
    meta["task_id"] = ctx.task_id;
    meta["instruction_tokens"] = ctx.instruction_tokens;
    meta["has_peft"] = ctx.has_peft;
    meta["checkpoint_fingerprint"] = checkpoint_fingerprint;
    meta["model_config"] = json::parse(model_config_to_json(mc));
    file.meta_json = meta.dump();
    std::string path = path_for(ctx.task_id);
    write_array_file(path, file);
    return path;
}

TaskContext TaskCache::get(const std::string& task_id, const ModelConfig& mc,
                           const std::string& checkpoint_fingerprint) const {
    check_task_id(task_id);
    std::string path = path_for(task_id);
    if (!fs::exists(path)) {
        throw DataError("task cache: no entry for '" + task_id + "' in " + dir_);
    }
    NamedArrayFile file = read_array_file(path);
    if (file.kind != "task_context") {
        throw DataError("'" + path + "': kind '" + file.kind + "', expected 'task_context'");
    }
    json meta = json::parse(file.meta_json, nullptr, false);
    if (meta.is_discarded()) throw DataError("'" + path + "': malformed metadata");
    TaskContext ctx;
    try {
        ctx.task_id = meta.at("task_id").get<std::string>();
        ctx.instruction_tokens = meta.at("instruction_tokens").get<std::vector<int>>();
        ctx.has_peft = meta.at("has_peft").get<bool>();
        std::string stored_fp = meta.at("checkpoint_fingerprint").get<std::string>();
        if (stored_fp != checkpoint_fingerprint) {
            throw DataError("task cache: entry '" + task_id + "' was generated from checkpoint " +
                            stored_fp + ", current checkpoint is " + checkpoint_fingerprint +
                            "; re-warm the cache");
        }
        ModelConfig stored_mc = model_config_from_json(meta.at("model_config").dump());
        if (!(stored_mc == mc)) {
            throw DataError("task cache: entry '" + task_id +
                            "' was generated under a different model config");
        }
    } catch (const json::exception& e) {
        throw DataError("'" + path + "': metadata field error: " + e.what());
    }
    for (const auto& [name, t] : file.arrays) {
        if (name == "encoded_instruction") {
            ctx.encoded_instruction.states = t;
        }
    }
    if (ctx.encoded_instruction.length() == 0) {
        throw DataError("'" + path + "': missing encoded_instruction array");
    }
    if (ctx.has_peft) {
        ctx.peft = rebuild_peft(file.arrays, mc);
        ctx.peft.validate(mc);
    }
    return ctx;
}

bool TaskCache::contains(const std::string& task_id) const {
    return fs::exists(path_for(task_id));
}

bool TaskCache::evict(const std::string& task_id) {
    check_task_id(task_id);
    std::error_code ec;
    bool removed = fs::remove(path_for(task_id), ec);
    if (ec) throw DataError("task cache: cannot remove entry for '" + task_id + "'");
    return removed;
}

std::vector<TaskCache::Entry> TaskCache::list() const {
    std::vector<Entry> out;
    if (!fs::exists(dir_)) return out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir_)) {
        if (e.is_regular_file() && e.path().extension() == ".ctx") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        NamedArrayFile file = read_array_file(p.string());
        json meta = json::parse(file.meta_json, nullptr, false);
        Entry entry;
        entry.task_id = meta.is_discarded() ? p.stem().string()
                                            : meta.value("task_id", p.stem().string());
        entry.path = p.string();
        entry.checkpoint_fingerprint =
            meta.is_discarded() ? "" : meta.value("checkpoint_fingerprint", "");
        entry.bytes = static_cast<std::uint64_t>(fs::file_size(p));
        out.push_back(std::move(entry));
    }
    return out;
}

} // namespace hint
