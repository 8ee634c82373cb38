#include "hint/config.hpp"

#include "hint/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace hint {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

void ModelConfig::validate() const {
    auto bad = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
    if (layers < 1) bad("layers must be >= 1");
    if (d_model < 1) bad("d_model must be >= 1");
    if (heads < 1) bad("heads must be >= 1");
    if (head_dim < 1) bad("head_dim must be >= 1");
    if (heads * head_dim != d_model) {
        bad("heads * head_dim must equal d_model (" + std::to_string(heads) + " * " +
            std::to_string(head_dim) + " != " + std::to_string(d_model) + ")");
    }
    if (ffn_dim < 1) bad("ffn_dim must be >= 1");
    if (vocab_size < 2) bad("vocab_size must be >= 2");
    if (max_seq_len < 1) bad("max_seq_len must be >= 1");
    if (adapter_bottleneck < 1) bad("adapter_bottleneck must be >= 1");
    if (prefix_length < 1) bad("prefix_length must be >= 1");
    if (embed_dim != d_model) {
        bad("embed_dim must equal d_model for the tied encoder (" +
            std::to_string(embed_dim) + " != " + std::to_string(d_model) + ")");
    }
    if (lora_rank < 1) bad("lora_rank must be >= 1");
    if (!kinds.any()) bad("at least one module kind must be enabled");
}

void TrainConfig::validate() const {
    auto bad = [](const std::string& msg) { throw ConfigError("train config: " + msg); };
    if (steps < 0) bad("steps must be >= 0");
    if (batch_size < 1) bad("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) bad("learning_rate must be > 0");
    if (!(grad_clip > 0.0)) bad("grad_clip must be > 0");
    if (fewshot_mix < 0.0 || fewshot_mix > 1.0) bad("fewshot_mix must be in [0, 1]");
    if (fewshot_k < 0) bad("fewshot_k must be >= 0");
    if (pretrain_seq_len < 4) bad("pretrain_seq_len must be >= 4");
    if (log_every < 1) bad("log_every must be >= 1");
    if (setting != RunSetting::hint && ablation != Ablation::none) {
        bad("ablations only apply to the hint setting");
    }
}

bool fusion_enabled(RunSetting s, Ablation a) {
    if (s != RunSetting::hint) return false;
    return a == Ablation::none || a == Ablation::no_peft;
}

bool generator_enabled(RunSetting s, Ablation a) {
    return s == RunSetting::hint && a != Ablation::no_peft;
}

bool fusion_enabled(const TrainConfig& tc) {
    return fusion_enabled(tc.setting, tc.ablation);
}

bool generator_enabled(const TrainConfig& tc) {
    return generator_enabled(tc.setting, tc.ablation);
}

PeftKinds effective_kinds(const PeftKinds& base, Ablation ab) {
    switch (ab) {
        case Ablation::adapters_only: return {true, false, false};
        case Ablation::prefixes_only: return {false, true, false};
        case Ablation::lora_only:     return {false, false, true};
        default:                      return base;
    }
}

const char* to_string(TrainMode m) {
    return m == TrainMode::pretrain ? "pretrain" : "finetune";
}

const char* to_string(RunSetting s) {
    switch (s) {
        case RunSetting::hint: return "hint";
        case RunSetting::concat_baseline: return "concat_baseline";
        default: return "no_instruct";
    }
}

const char* to_string(Ablation a) {
    switch (a) {
        case Ablation::none: return "none";
        case Ablation::adapters_only: return "adapters_only";
        case Ablation::prefixes_only: return "prefixes_only";
        case Ablation::lora_only: return "lora_only";
        case Ablation::no_fusion: return "no_fusion";
        default: return "no_peft";
    }
}

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "pretrain") return TrainMode::pretrain;
    if (s == "finetune") return TrainMode::finetune;
    throw ConfigError("unknown train mode '" + s + "'");
}

RunSetting run_setting_from_string(const std::string& s) {
    if (s == "hint") return RunSetting::hint;
    if (s == "concat_baseline") return RunSetting::concat_baseline;
    if (s == "no_instruct") return RunSetting::no_instruct;
    throw ConfigError("unknown setting '" + s + "' (expected hint, concat_baseline or no_instruct)");
}

Ablation ablation_from_string(const std::string& s) {
    if (s == "none") return Ablation::none;
    if (s == "adapters_only") return Ablation::adapters_only;
    if (s == "prefixes_only") return Ablation::prefixes_only;
    if (s == "lora_only") return Ablation::lora_only;
    if (s == "no_fusion") return Ablation::no_fusion;
    if (s == "no_peft") return Ablation::no_peft;
    throw ConfigError("unknown ablation '" + s + "'");
}

KvConfig KvConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
}

KvConfig KvConfig::parse_text(const std::string& text, const std::string& origin) {
    KvConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": malformed section header '" + line + "'");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
            }
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected key = value, got '" + line + "'");
        }
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        std::string full = section.empty() ? key : section + "." + key;
        if (cfg.entries_.count(full)) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": duplicate key '" + full + "'");
        }
        cfg.entries_[full] = val;
    }
    return cfg;
}

bool KvConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

int KvConfig::get_int(const std::string& key, int fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        std::size_t pos = 0;
        int v = std::stoi(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected integer, got '" + it->second + "'");
    }
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        std::size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected number, got '" + it->second + "'");
    }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected boolean, got '" + it->second + "'");
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected unsigned integer, got '" +
                          it->second + "'");
    }
}

void KvConfig::require_known(const std::vector<std::string>& known) const {
    for (const auto& [key, _] : entries_) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown config key '" + key + "'" +
                              (origin_.empty() ? "" : " in " + origin_));
        }
    }
}

std::vector<std::string> known_config_keys() {
    return {
        "model.layers", "model.d_model", "model.heads", "model.head_dim",
        "model.ffn_dim", "model.vocab_size", "model.max_seq_len",
        "model.adapter_bottleneck", "model.prefix_length", "model.embed_dim",
        "model.lora_rank", "model.adapters", "model.prefixes", "model.lora",
        "train.steps", "train.batch_size", "train.learning_rate", "train.grad_clip",
        "train.seed", "train.fewshot_mix", "train.fewshot_k", "train.pretrain_seq_len",
        "train.log_every", "run.setting", "run.ablation",
    };
}

ModelConfig model_config_from_kv(const KvConfig& kv) {
    ModelConfig mc;
    mc.layers = kv.get_int("model.layers", mc.layers);
    mc.d_model = kv.get_int("model.d_model", mc.d_model);
    mc.heads = kv.get_int("model.heads", mc.heads);
    mc.head_dim = kv.get_int("model.head_dim", mc.head_dim);
    mc.ffn_dim = kv.get_int("model.ffn_dim", mc.ffn_dim);
    mc.vocab_size = kv.get_int("model.vocab_size", mc.vocab_size);
    mc.max_seq_len = kv.get_int("model.max_seq_len", mc.max_seq_len);
    mc.adapter_bottleneck = kv.get_int("model.adapter_bottleneck", mc.adapter_bottleneck);
    mc.prefix_length = kv.get_int("model.prefix_length", mc.prefix_length);
    mc.embed_dim = kv.get_int("model.embed_dim", mc.d_model);
    mc.lora_rank = kv.get_int("model.lora_rank", mc.lora_rank);
    mc.kinds.adapters = kv.get_bool("model.adapters", mc.kinds.adapters);
    mc.kinds.prefixes = kv.get_bool("model.prefixes", mc.kinds.prefixes);
    mc.kinds.lora = kv.get_bool("model.lora", mc.kinds.lora);
    mc.validate();
    return mc;
}

TrainConfig train_config_from_kv(const KvConfig& kv) {
    TrainConfig tc;
    tc.steps = kv.get_int("train.steps", tc.steps);
    tc.batch_size = kv.get_int("train.batch_size", tc.batch_size);
    tc.learning_rate = kv.get_double("train.learning_rate", tc.learning_rate);
    tc.grad_clip = kv.get_double("train.grad_clip", tc.grad_clip);
    tc.seed = kv.get_u64("train.seed", tc.seed);
    tc.fewshot_mix = kv.get_double("train.fewshot_mix", tc.fewshot_mix);
    tc.fewshot_k = kv.get_int("train.fewshot_k", tc.fewshot_k);
    tc.pretrain_seq_len = kv.get_int("train.pretrain_seq_len", tc.pretrain_seq_len);
    tc.log_every = kv.get_int("train.log_every", tc.log_every);
    tc.setting = run_setting_from_string(kv.get_string("run.setting", "hint"));
    tc.ablation = ablation_from_string(kv.get_string("run.ablation", "none"));
    tc.validate();
    return tc;
}

std::string render_config(const ModelConfig& mc, const TrainConfig& tc) {
    std::ostringstream os;
    os << "[model]\n";
    os << "layers = " << mc.layers << "\n";
    os << "d_model = " << mc.d_model << "\n";
    os << "heads = " << mc.heads << "\n";
    os << "head_dim = " << mc.head_dim << "\n";
    os << "ffn_dim = " << mc.ffn_dim << "\n";
    os << "vocab_size = " << mc.vocab_size << "\n";
    os << "max_seq_len = " << mc.max_seq_len << "\n";
    os << "adapter_bottleneck = " << mc.adapter_bottleneck << "\n";
    os << "prefix_length = " << mc.prefix_length << "\n";
    os << "embed_dim = " << mc.embed_dim << "\n";
    os << "lora_rank = " << mc.lora_rank << "\n";
    os << "adapters = " << (mc.kinds.adapters ? "true" : "false") << "\n";
    os << "prefixes = " << (mc.kinds.prefixes ? "true" : "false") << "\n";
    os << "lora = " << (mc.kinds.lora ? "true" : "false") << "\n";
    os << "\n[train]\n";
    os << "steps = " << tc.steps << "\n";
    os << "batch_size = " << tc.batch_size << "\n";
    os << "learning_rate = " << tc.learning_rate << "\n";
    os << "grad_clip = " << tc.grad_clip << "\n";
    os << "seed = " << tc.seed << "\n";
    os << "fewshot_mix = " << tc.fewshot_mix << "\n";
    os << "fewshot_k = " << tc.fewshot_k << "\n";
    os << "pretrain_seq_len = " << tc.pretrain_seq_len << "\n";
    os << "log_every = " << tc.log_every << "\n";
    os << "\n[run]\n";
    os << "setting = " << to_string(tc.setting) << "\n";
    os << "ablation = " << to_string(tc.ablation) << "\n";
    return os.str();
}

std::string model_config_to_json(const ModelConfig& mc) {
    json j{
        {"layers", mc.layers},
        {"d_model", mc.d_model},
        {"heads", mc.heads},
        {"head_dim", mc.head_dim},
        {"ffn_dim", mc.ffn_dim},
        {"vocab_size", mc.vocab_size},
        {"max_seq_len", mc.max_seq_len},
        {"adapter_bottleneck", mc.adapter_bottleneck},
        {"prefix_length", mc.prefix_length},
        {"embed_dim", mc.embed_dim},
        {"lora_rank", mc.lora_rank},
        {"adapters", mc.kinds.adapters},
        {"prefixes", mc.kinds.prefixes},
        {"lora", mc.kinds.lora},
    };
    return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("malformed model config json");
    ModelConfig mc;
    try {
        mc.layers = j.at("layers").get<int>();
        mc.d_model = j.at("d_model").get<int>();
        mc.heads = j.at("heads").get<int>();
        mc.head_dim = j.at("head_dim").get<int>();
        mc.ffn_dim = j.at("ffn_dim").get<int>();
        mc.vocab_size = j.at("vocab_size").get<int>();
        mc.max_seq_len = j.at("max_seq_len").get<int>();
        mc.adapter_bottleneck = j.at("adapter_bottleneck").get<int>();
        mc.prefix_length = j.at("prefix_length").get<int>();
        mc.embed_dim = j.at("embed_dim").get<int>();
        mc.lora_rank = j.at("lora_rank").get<int>();
        mc.kinds.adapters = j.at("adapters").get<bool>();
        mc.kinds.prefixes = j.at("prefixes").get<bool>();
        mc.kinds.lora = j.at("lora").get<bool>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config json: ") + e.what());
    }
    mc.validate();
    return mc;
}

std::string train_config_to_json(const TrainConfig& tc) {
    json j{
        {"mode", to_string(tc.mode)},
        {"setting", to_string(tc.setting)},
        {"ablation", to_string(tc.ablation)},
        {"steps", tc.steps},
        {"batch_size", tc.batch_size},
        {"learning_rate", tc.learning_rate},
        {"grad_clip", tc.grad_clip},
        {"seed", tc.seed},
        {"fewshot_mix", tc.fewshot_mix},
        {"fewshot_k", tc.fewshot_k},
        {"pretrain_seq_len", tc.pretrain_seq_len},
        {"log_every", tc.log_every},
    };
    return j.dump();
}

TrainConfig train_config_from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("malformed train config json");
    TrainConfig tc;
    try {
        tc.mode = train_mode_from_string(j.at("mode").get<std::string>());
        tc.setting = run_setting_from_string(j.at("setting").get<std::string>());
        tc.ablation = ablation_from_string(j.at("ablation").get<std::string>());
        tc.steps = j.at("steps").get<int>();
        tc.batch_size = j.at("batch_size").get<int>();
        tc.learning_rate = j.at("learning_rate").get<double>();
        tc.grad_clip = j.at("grad_clip").get<double>();
        tc.seed = j.at("seed").get<std::uint64_t>();
        tc.fewshot_mix = j.at("fewshot_mix").get<double>();
        tc.fewshot_k = j.at("fewshot_k").get<int>();
        tc.pretrain_seq_len = j.at("pretrain_seq_len").get<int>();
        tc.log_every = j.at("log_every").get<int>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train config json: ") + e.what());
    }
    tc.validate();
    return tc;
}

} // namespace hint
