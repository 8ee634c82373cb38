#pragma once

#include "hint/peft.hpp"
#include "hint/transformer.hpp"

#include <span>
#include <string>
#include <vector>

namespace hint {

class Rng;

// What a bank row parameterizes. Each generated weight matrix owns a run of
// consecutive rows (one embedding per generated column), so the generator
// MLPs stay the same size no matter how wide the modules get.
enum class SlotKind {
    adapter_down,
    adapter_up,
    prefix_self_key,
    prefix_self_value,
    prefix_cross_key,
    prefix_cross_value,
    lora_q_a,
    lora_q_b,
    lora_v_a,
    lora_v_b,
};

const char* to_string(SlotKind k);
bool is_adapter_slot(SlotKind k);
bool is_prefix_slot(SlotKind k);
bool is_lora_slot(SlotKind k);

struct SlotSpec {
    int layer;     // 0..2*layers-1, encoder blocks first
    SlotKind kind;
    int rows;      // bank rows this matrix consumes
};

// Canonical slot order: all adapter matrices, then all prefix vectors, then
// all lora factors; layer-major within each group. Bank row assignment and
// generation both walk this list, so the row -> parameter map is total.
std::vector<SlotSpec> bank_slots(const ModelConfig& mc);
int bank_total_rows(const ModelConfig& mc);

struct RowRef {
    int layer;
    SlotKind kind;
    int slot; // row index within its matrix
};

struct GeneratorBank {
    Tensor embed_table; // [M x n_e]
    Tensor cross_norm;  // [n_e]
    AttentionWeights cross;
    Tensor mlp_adapter_in, mlp_adapter_out; // [n_e x n_e], [n_e x d]
    Tensor mlp_prefix_in, mlp_prefix_out;
    Tensor mlp_lora_in, mlp_lora_out;
    std::vector<RowRef> index_map; // one entry per bank row
};

struct TaskContext {
    std::string task_id;
    std::vector<int> instruction_tokens;
    EncoderOutput encoded_instruction;
    PeftSet peft;
    bool has_peft = false;
};

// Generates PEFT modules from an encoded instruction. The instruction
// encoder IS the underlying model's encoder (weight tying): this class holds
// a non-owning pointer and adds only the generator bank on top.
class Hypernetwork {
public:
    Hypernetwork() = default;

    static Hypernetwork init(const TransformerModel* model, Rng& rng,
                             bool with_generator = true);

    const TransformerModel* model() const { return model_; }
    bool has_generator() const { return bank_.embed_table.defined(); }
    const GeneratorBank& bank() const { return bank_; }
    GeneratorBank& bank() { return bank_; }

    // Tied encoder pass over instruction tokens (no PEFT, no fusion source).
    EncoderOutput hyper_encode(std::span<const int> instruction_tokens,
                               AttentionTrace* trace = nullptr) const;

    // Cross-attend bank embeddings over the encoded instruction, run the
    // per-kind MLPs, reassemble matrices. Differentiable end to end.
    PeftSet generate(const EncoderOutput& encoded_instruction) const;

    TaskContext build_task_context(const std::string& task_id,
                                   std::span<const int> instruction_tokens) const;

    // Bank parameters only; the tied encoder belongs to the model.
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    std::size_t parameter_count() const;

private:
    const TransformerModel* model_ = nullptr;
    GeneratorBank bank_;
};

// Decoder cross-attention source under instruction fusion: encoded
// instruction states followed by encoded input states.
EncoderOutput fuse_memory(const EncoderOutput& instruction, const EncoderOutput& input);

} // namespace hint
