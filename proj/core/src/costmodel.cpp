#include "hint/costmodel.hpp"

#include "hint/errors.hpp"
#include "hint/hypernet.hpp"

#include <cinttypes>
#include <cstdio>
#include <sstream>

namespace hint {

void CostScenario::validate() const {
    auto bad = [this](const char* what) {
        throw ConfigError("cost scenario '" + name + "': " + what);
    };
    if (model_params < 0 || hyper_params < 0 || adapted_params < 0) {
        bad("parameter counts must be >= 0");
    }
    if (instruction_tokens < 0 || input_tokens < 0 || output_tokens < 0 ||
        concat_input_tokens < 0) {
        bad("token counts must be >= 0");
    }
    if (examples < 1) bad("examples must be >= 1");
}

std::int64_t flops_concat(const CostScenario& s) {
    s.validate();
    std::int64_t prompt = s.concat_input_tokens > 0
                              ? s.concat_input_tokens
                              : s.instruction_tokens + s.input_tokens;
    return s.model_params * s.examples * (prompt + s.output_tokens);
}

std::int64_t flops_hint(const CostScenario& s) {
    s.validate();
    return s.instruction_tokens * (s.model_params + s.hyper_params) +
           s.examples * (s.model_params + s.adapted_params) *
               (s.input_tokens + s.output_tokens);
}

std::int64_t flops_hint_simplified(const CostScenario& s) {
    s.validate();
    return s.instruction_tokens * s.model_params +
           s.examples * s.model_params * (s.input_tokens + s.output_tokens);
}

std::int64_t crossover_examples(CostScenario s, std::int64_t limit) {
    for (std::int64_t n = 1; n <= limit; ++n) {
        s.examples = n;
        if (flops_hint(s) < flops_concat(s)) return n;
    }
    return -1;
}

std::int64_t memory_kv_cache(std::int64_t layers, std::int64_t heads,
                             std::int64_t head_dim, std::int64_t seq_tokens) {
    if (layers < 0 || heads < 0 || head_dim < 0 || seq_tokens < 0) {
        throw ConfigError("memory_kv_cache: counts must be >= 0");
    }
    return 2 * layers * heads * head_dim * seq_tokens;
}

std::int64_t memory_hint(std::int64_t layers, std::int64_t d_model, std::int64_t heads,
                         std::int64_t head_dim, std::int64_t seq_tokens,
                         std::int64_t prefix_length, std::int64_t bottleneck) {
    if (layers < 0 || d_model < 0 || heads < 0 || head_dim < 0 || seq_tokens < 0 ||
        prefix_length < 0 || bottleneck < 0) {
        throw ConfigError("memory_hint: counts must be >= 0");
    }
    return d_model * seq_tokens + 2 * bottleneck * layers * d_model +
           2 * prefix_length * layers * heads * head_dim;
}

std::int64_t backbone_param_count(const ModelConfig& mc) {
    std::int64_t d = mc.d_model, f = mc.ffn_dim, v = mc.vocab_size;
    std::int64_t per_enc = d + 4 * d * d + d + d * f + f * d;
    std::int64_t per_dec = d + 4 * d * d + d + 4 * d * d + d + d * f + f * d;
    std::int64_t n = v * d;                      // token embeddings
    n += 2 * static_cast<std::int64_t>(mc.max_seq_len) * d; // position tables
    n += mc.layers * (per_enc + per_dec);
    n += 2 * d;   // final stack norms
    n += d * v;   // output projection
    return n;
}

std::int64_t generator_param_count(const ModelConfig& mc) {
    if (!mc.kinds.any()) return 0;
    std::int64_t ne = mc.embed_dim, d = mc.d_model;
    std::int64_t n = static_cast<std::int64_t>(bank_total_rows(mc)) * ne;
    n += ne;         // query-side norm
    n += 4 * ne * ne; // cross-attention
    int kinds = (mc.kinds.adapters ? 1 : 0) + (mc.kinds.prefixes ? 1 : 0) +
                (mc.kinds.lora ? 1 : 0);
    n += static_cast<std::int64_t>(kinds) * (ne * ne + ne * d);
    return n;
}

std::int64_t injected_param_count(const ModelConfig& mc) {
    std::int64_t total_layers = 2 * mc.layers;
    std::int64_t d = mc.d_model;
    std::int64_t n = 0;
    if (mc.kinds.adapters) n += total_layers * 2 * mc.adapter_bottleneck * d;
    if (mc.kinds.prefixes) {
        // self prefixes everywhere, cross prefixes in decoder layers
        n += (total_layers + mc.layers) * 2 * mc.prefix_length * d;
    }
    if (mc.kinds.lora) n += total_layers * 4 * mc.lora_rank * d;
    return n;
}

namespace {

CostScenario make_scenario(std::string name, std::int64_t n_params, std::int64_t np,
                           std::int64_t a, std::int64_t t, std::int64_t i,
                           std::int64_t o, std::int64_t concat_len, std::int64_t n) {
    CostScenario s;
    s.name = std::move(name);
    s.model_params = n_params;
    s.hyper_params = np;
    s.adapted_params = a;
    s.instruction_tokens = t;
    s.input_tokens = i;
    s.output_tokens = o;
    s.concat_input_tokens = concat_len;
    s.examples = n;
    return s;
}

} // namespace

ModelConfig paper_scale_config() {
    ModelConfig mc;
    mc.layers = 12;
    mc.d_model = 768;
    mc.heads = 12;
    mc.head_dim = 64;
    mc.ffn_dim = 3072;
    mc.vocab_size = 32128;
    mc.max_seq_len = 512;
    mc.adapter_bottleneck = 512;
    mc.prefix_length = 30;
    mc.embed_dim = 768;
    mc.lora_rank = 4;
    mc.kinds = {true, true, false};
    return mc;
}

std::vector<CostScenario> sni_scenarios(std::int64_t model_params,
                                        std::int64_t hyper_params,
                                        std::int64_t adapted_params,
                                        std::int64_t examples) {
    // Median token lengths: instance 44, instruction 69, instruction +
    // instance 133, instruction + 2 positives 197, all three 199, output 1.
    return {
        make_scenario("def", model_params, hyper_params, adapted_params,
                      69, 44, 1, 133, examples),
        make_scenario("def_2pos", model_params, hyper_params, adapted_params,
                      197, 44, 1, 199, examples),
    };
}

std::vector<CostScenario> p3_scenarios(std::int64_t model_params,
                                       std::int64_t hyper_params,
                                       std::int64_t adapted_params,
                                       std::int64_t examples) {
    // Medians: instance 81, prompt 24, prompt + instance 103, output 6.
    return {
        make_scenario("prompt", model_params, hyper_params, adapted_params,
                      24, 81, 6, 103, examples),
    };
}

CostReport relative_flops_report(const std::vector<CostScenario>& scenarios,
                                 const std::string& reference_scenario) {
    const CostScenario* ref = nullptr;
    for (const auto& s : scenarios) {
        if (s.name == reference_scenario) {
            ref = &s;
            break;
        }
    }
    if (!ref) {
        throw ConfigError("relative_flops_report: reference scenario '" +
                          reference_scenario + "' not in scenario list");
    }
    CostReport report;
    report.reference = reference_scenario;
    report.reference_flops = flops_concat(*ref);
    if (report.reference_flops <= 0) {
        throw ConfigError("relative_flops_report: reference has zero cost");
    }
    for (const auto& s : scenarios) {
        CostRow row;
        row.scenario = s.name;
        row.flops_concat = flops_concat(s);
        row.flops_hint = flops_hint(s);
        row.flops_hint_simplified = flops_hint_simplified(s);
        row.rel_concat = static_cast<double>(row.flops_concat) /
                         static_cast<double>(report.reference_flops);
        row.rel_hint = static_cast<double>(row.flops_hint) /
                       static_cast<double>(report.reference_flops);
        row.crossover_n = crossover_examples(s);
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string cost_report_csv(const CostReport& report, const std::string& manifest_hash) {
    std::ostringstream os;
    os << "# manifest " << manifest_hash << "\n";
    os << "scenario,flops_concat,flops_hint,flops_hint_simplified,rel_concat,rel_hint,crossover_n\n";
    char buf[64];
    for (const auto& r : report.rows) {
        os << r.scenario << "," << r.flops_concat << "," << r.flops_hint << ","
           << r.flops_hint_simplified << ",";
        std::snprintf(buf, sizeof(buf), "%.4f,%.4f", r.rel_concat, r.rel_hint);
        os << buf << "," << r.crossover_n << "\n";
    }
    return os.str();
}

std::string cost_report_markdown(const CostReport& report) {
    std::ostringstream os;
    os << "| scenario | mode | FLOPs | relative |\n";
    os << "|---|---|---:|---:|\n";
    char buf[64];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof(buf), "%.2f", r.rel_concat);
        os << "| " << r.scenario << " | concat | " << r.flops_concat << " | x" << buf
           << " |\n";
        std::snprintf(buf, sizeof(buf), "%.2f", r.rel_hint);
        os << "| " << r.scenario << " | hint | " << r.flops_hint << " | x" << buf
           << " |\n";
    }
    os << "\nreference: " << report.reference
       << " (concat); counts use the N-FLOPs-per-token convention, double them "
          "for the 2N multiply-accumulate convention.\n";
    return os.str();
}

std::vector<SweepRow> instruction_length_sweep(CostScenario base,
                                               const std::vector<std::int64_t>& t_values) {
    std::vector<SweepRow> rows;
    for (std::int64_t t : t_values) {
        base.instruction_tokens = t;
        base.concat_input_tokens = t + base.input_tokens;
        SweepRow row;
        row.t = t;
        row.flops_concat = flops_concat(base);
        row.flops_hint = flops_hint(base);
        rows.push_back(row);
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& manifest_hash) {
    std::ostringstream os;
    os << "# manifest " << manifest_hash << "\n";
    os << "t,flops_concat,flops_hint\n";
    for (const auto& r : rows) {
        os << r.t << "," << r.flops_concat << "," << r.flops_hint << "\n";
    }
    return os.str();
}

std::vector<MemoryRow> memory_sweep(std::int64_t layers, std::int64_t d_model,
                                    std::int64_t heads, std::int64_t head_dim,
                                    std::int64_t prefix_length, std::int64_t bottleneck,
                                    const std::vector<std::int64_t>& seq_lengths) {
    std::vector<MemoryRow> rows;
    for (std::int64_t s : seq_lengths) {
        MemoryRow row;
        row.seq_tokens = s;
        row.kv_cache = memory_kv_cache(layers, heads, head_dim, s);
        row.hint_state = memory_hint(layers, d_model, heads, head_dim, s,
                                     prefix_length, bottleneck);
        row.ratio = row.kv_cache > 0 ? static_cast<double>(row.hint_state) /
                                           static_cast<double>(row.kv_cache)
                                     : 0.0;
        rows.push_back(row);
    }
    return rows;
}

std::string memory_sweep_csv(const std::vector<MemoryRow>& rows,
                             const std::string& manifest_hash) {
    std::ostringstream os;
    os << "# manifest " << manifest_hash << "\n";
    os << "seq_tokens,kv_cache,hint_state,ratio\n";
    char buf[32];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.4f", r.ratio);
        os << r.seq_tokens << "," << r.kv_cache << "," << r.hint_state << "," << buf
           << "\n";
    }
    return os.str();
}

} // namespace hint
