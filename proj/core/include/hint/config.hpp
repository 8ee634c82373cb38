#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace hint {

struct PeftKinds {
    bool adapters = true;
    bool prefixes = true;
    bool lora = false;

    bool any() const { return adapters || prefixes || lora; }
    bool operator==(const PeftKinds&) const = default;
};

// Architecture knobs. `layers` counts per stack (encoder and decoder each get
// that many blocks). embed_dim is the width of the generator's column
// embeddings and must match d_model so the weight-tied encoder output can be
// attended to directly.
struct ModelConfig {
    int layers = 2;
    int d_model = 64;
    int heads = 4;
    int head_dim = 16;
    int ffn_dim = 128;
    int vocab_size = 260;
    int max_seq_len = 384;
    int adapter_bottleneck = 32;
    int prefix_length = 8;
    int embed_dim = 64;
    int lora_rank = 4;
    PeftKinds kinds;

    void validate() const; // throws ConfigError
    bool operator==(const ModelConfig&) const = default;
};

enum class TrainMode { pretrain, finetune };
enum class RunSetting { hint, concat_baseline, no_instruct };
enum class Ablation { none, adapters_only, prefixes_only, lora_only, no_fusion, no_peft };

struct TrainConfig {
    TrainMode mode = TrainMode::finetune;
    RunSetting setting = RunSetting::hint;
    Ablation ablation = Ablation::none;
    int steps = 1500;
    int batch_size = 8;
    double learning_rate = 1e-3;
    double grad_clip = 1.0;
    std::uint64_t seed = 1;
    // Fraction of finetune items formatted with few-shot examples in the
    // instruction context (so one run covers both eval formats).
    double fewshot_mix = 0.5;
    int fewshot_k = 2;
    int pretrain_seq_len = 48;
    int log_every = 25;

    void validate() const;
};

bool fusion_enabled(RunSetting s, Ablation a);
bool generator_enabled(RunSetting s, Ablation a);
bool fusion_enabled(const TrainConfig& tc);
bool generator_enabled(const TrainConfig& tc);
// Ablations that isolate one module kind also run without instruction fusion,
// so the measured signal comes from the generated modules alone. no_peft
// leaves the kind flags alone; the generator is simply never built.
PeftKinds effective_kinds(const PeftKinds& base, Ablation ab);

const char* to_string(TrainMode m);
const char* to_string(RunSetting s);
const char* to_string(Ablation a);
TrainMode train_mode_from_string(const std::string& s);
RunSetting run_setting_from_string(const std::string& s);
Ablation ablation_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Flat key=value config files with [section] headers and '#' comments.
// Keys are addressed as "section.key". Unknown keys are rejected by the CLI
// so typos fail loudly.

class KvConfig {
public:
    static KvConfig parse_file(const std::string& path);
    static KvConfig parse_text(const std::string& text, const std::string& origin);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    int get_int(const std::string& key, int fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }
    // Throws ConfigError naming the first key not in `known`.
    void require_known(const std::vector<std::string>& known) const;

private:
    std::map<std::string, std::string> entries_;
    std::string origin_;
};

ModelConfig model_config_from_kv(const KvConfig& kv);
TrainConfig train_config_from_kv(const KvConfig& kv);
// The full key list accepted in config files (model.* train.* run.*).
std::vector<std::string> known_config_keys();
// Render a config as the same file format parse_file reads.
std::string render_config(const ModelConfig& mc, const TrainConfig& tc);

std::string model_config_to_json(const ModelConfig& mc);
ModelConfig model_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& tc);
TrainConfig train_config_from_json(const std::string& text);

} // namespace hint
