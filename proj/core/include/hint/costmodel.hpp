#pragma once

#include "hint/config.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hint {

// Analytic inference cost model. All counts are exact int64 formulas; ratios
// are the only doubles. Convention: processing one token through a model of
// N parameters costs N FLOPs (double the numbers for the multiply-accumulate
// 2N convention; ratios are unaffected).
//   N  - underlying model parameter count
//   Np - hypernetwork generator parameter count
//   A  - parameters injected into the model by the generated modules
//   t  - instruction(+few-shot) tokens, i - instance tokens, o - output
//   n  - number of same-task examples the instruction cost amortizes over

struct CostScenario {
    std::string name;
    std::int64_t model_params = 0;       // N
    std::int64_t hyper_params = 0;       // Np
    std::int64_t adapted_params = 0;     // A
    std::int64_t instruction_tokens = 0; // t
    std::int64_t input_tokens = 0;       // i
    std::int64_t output_tokens = 0;      // o
    std::int64_t examples = 1;           // n
    // Measured length of the combined instruction+instance prompt the
    // baseline feeds per example; 0 means "use t + i". Kept separate because
    // a median of combined lengths is not the sum of the two medians.
    std::int64_t concat_input_tokens = 0;

    void validate() const; // throws ConfigError
};

// Baseline: instruction re-encoded with every example. N·n·(t+i+o), with the
// measured combined prompt length substituted for t+i when provided.
std::int64_t flops_concat(const CostScenario& s);
// Instruction processed once: t(N+Np) + n(N+A)(i+o).
std::int64_t flops_hint(const CostScenario& s);
// Large-N simplification: tN + nN(i+o).
std::int64_t flops_hint_simplified(const CostScenario& s);

// Smallest n >= 1 with flops_hint < flops_concat, or -1 if none up to limit.
std::int64_t crossover_examples(CostScenario s, std::int64_t limit = 1'000'000);

// Extra decoder-side state per cached task/sequence, in stored values.
// Baseline: key/value cache over s tokens = 2lhks. Hint: fused instruction
// states + adapter weights + prefixes = ds + 2*bottleneck*ld + 2*prefix*lhk.
std::int64_t memory_kv_cache(std::int64_t layers, std::int64_t heads,
                             std::int64_t head_dim, std::int64_t seq_tokens);
std::int64_t memory_hint(std::int64_t layers, std::int64_t d_model, std::int64_t heads,
                         std::int64_t head_dim, std::int64_t seq_tokens,
                         std::int64_t prefix_length, std::int64_t bottleneck);

// ---------------------------------------------------------------------------
// Parameter counting. These mirror the constructive code exactly; tests pin
// them against instantiated models.

std::int64_t backbone_param_count(const ModelConfig& mc);
std::int64_t generator_param_count(const ModelConfig& mc);
std::int64_t injected_param_count(const ModelConfig& mc);

// ---------------------------------------------------------------------------
// Reports.

struct CostRow {
    std::string scenario;
    std::int64_t flops_concat = 0;
    std::int64_t flops_hint = 0;
    std::int64_t flops_hint_simplified = 0;
    double rel_concat = 0.0; // vs reference scenario's concat cost
    double rel_hint = 0.0;
    std::int64_t crossover_n = 0;
};

struct CostReport {
    std::vector<CostRow> rows;
    std::string reference;
    std::int64_t reference_flops = 0;
};

// Reference architecture for the published-scale cost presets: a ~250M
// parameter encoder-decoder with generator bottleneck 512 and prefix 30.
// Used only for analytic counting, never instantiated.
ModelConfig paper_scale_config();

// Token-length presets measured on the two instruction suites.
std::vector<CostScenario> sni_scenarios(std::int64_t model_params,
                                        std::int64_t hyper_params,
                                        std::int64_t adapted_params,
                                        std::int64_t examples);
std::vector<CostScenario> p3_scenarios(std::int64_t model_params,
                                       std::int64_t hyper_params,
                                       std::int64_t adapted_params,
                                       std::int64_t examples);

// Ratios divide by flops_concat of the named reference scenario.
CostReport relative_flops_report(const std::vector<CostScenario>& scenarios,
                                 const std::string& reference_scenario);

std::string cost_report_csv(const CostReport& report, const std::string& manifest_hash);
std::string cost_report_markdown(const CostReport& report);

struct SweepRow {
    std::int64_t t = 0;
    std::int64_t flops_concat = 0;
    std::int64_t flops_hint = 0;
};

// flops as a function of instruction length at fixed n (combined prompt
// follows t: concat sees t + i per example).
std::vector<SweepRow> instruction_length_sweep(CostScenario base,
                                               const std::vector<std::int64_t>& t_values);
std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& manifest_hash);

struct MemoryRow {
    std::int64_t seq_tokens = 0;
    std::int64_t kv_cache = 0;
    std::int64_t hint_state = 0;
    double ratio = 0.0; // hint / kv
};

std::vector<MemoryRow> memory_sweep(std::int64_t layers, std::int64_t d_model,
                                    std::int64_t heads, std::int64_t head_dim,
                                    std::int64_t prefix_length, std::int64_t bottleneck,
                                    const std::vector<std::int64_t>& seq_lengths);
std::string memory_sweep_csv(const std::vector<MemoryRow>& rows,
                             const std::string& manifest_hash);

} // namespace hint
