#include "hint/hypernet.hpp"

#include "hint/errors.hpp"
#include "hint/ops.hpp"
#include "hint/rng.hpp"

namespace hint {

const char* to_string(SlotKind k) {
    switch (k) {
        case SlotKind::adapter_down: return "adapter_down";
        case SlotKind::adapter_up: return "adapter_up";
        case SlotKind::prefix_self_key: return "prefix_self_key";
        case SlotKind::prefix_self_value: return "prefix_self_value";
        case SlotKind::prefix_cross_key: return "prefix_cross_key";
        case SlotKind::prefix_cross_value: return "prefix_cross_value";
        case SlotKind::lora_q_a: return "lora_q_a";
        case SlotKind::lora_q_b: return "lora_q_b";
        case SlotKind::lora_v_a: return "lora_v_a";
        default: return "lora_v_b";
    }
}

bool is_adapter_slot(SlotKind k) {
    return k == SlotKind::adapter_down || k == SlotKind::adapter_up;
}

bool is_prefix_slot(SlotKind k) {
    return k == SlotKind::prefix_self_key || k == SlotKind::prefix_self_value ||
           k == SlotKind::prefix_cross_key || k == SlotKind::prefix_cross_value;
}

bool is_lora_slot(SlotKind k) { return !is_adapter_slot(k) && !is_prefix_slot(k); }

std::vector<SlotSpec> bank_slots(const ModelConfig& mc) {
    std::vector<SlotSpec> slots;
    int total_layers = 2 * mc.layers;
    if (mc.kinds.adapters) {
        for (int i = 0; i < total_layers; ++i) {
            slots.push_back({i, SlotKind::adapter_down, mc.adapter_bottleneck});
            slots.push_back({i, SlotKind::adapter_up, mc.adapter_bottleneck});
        }
    }
    if (mc.kinds.prefixes) {
        for (int i = 0; i < total_layers; ++i) {
            slots.push_back({i, SlotKind::prefix_self_key, mc.prefix_length});
            slots.push_back({i, SlotKind::prefix_self_value, mc.prefix_length});
            if (i >= mc.layers) {
                slots.push_back({i, SlotKind::prefix_cross_key, mc.prefix_length});
                slots.push_back({i, SlotKind::prefix_cross_value, mc.prefix_length});
            }
        }
    }
    if (mc.kinds.lora) {
        for (int i = 0; i < total_layers; ++i) {
            slots.push_back({i, SlotKind::lora_q_a, mc.lora_rank});
            slots.push_back({i, SlotKind::lora_q_b, mc.lora_rank});
            slots.push_back({i, SlotKind::lora_v_a, mc.lora_rank});
            slots.push_back({i, SlotKind::lora_v_b, mc.lora_rank});
        }
    }
    return slots;
}

int bank_total_rows(const ModelConfig& mc) {
    int n = 0;
    for (const auto& s : bank_slots(mc)) n += s.rows;
    return n;
}

Hypernetwork Hypernetwork::init(const TransformerModel* model, Rng& rng,
                                bool with_generator) {
    if (!model) throw ContractError("Hypernetwork::init: null model");
    Hypernetwork h;
    h.model_ = model;
    if (!with_generator) return h;

    const ModelConfig& mc = model->config;
    int ne = mc.embed_dim;
    int m = bank_total_rows(mc);
    if (m == 0) throw ConfigError("generator bank is empty: no module kinds enabled");
    constexpr double stddev = 0.02;
    // Output layers start near zero so the initial modules are close to
    // an identity edit, while still passing gradient everywhere. An exactly
    // zero output layer would stall: with both adapter matrices zero, every
    // gradient into the generator is identically zero.
    constexpr double out_stddev = 1e-3;
    GeneratorBank& b = h.bank_;
    b.embed_table = Tensor::randn({m, ne}, rng, stddev, true);
    b.cross_norm = Tensor::full({ne}, 1.0, true);
    b.cross = AttentionWeights{
        Tensor::randn({ne, ne}, rng, stddev, true),
        Tensor::randn({ne, ne}, rng, stddev, true),
        Tensor::randn({ne, ne}, rng, stddev, true),
        Tensor::randn({ne, ne}, rng, stddev, true),
    };
    if (mc.kinds.adapters) {
        b.mlp_adapter_in = Tensor::randn({ne, ne}, rng, stddev, true);
        b.mlp_adapter_out = Tensor::randn({ne, mc.d_model}, rng, out_stddev, true);
    }
    if (mc.kinds.prefixes) {
        b.mlp_prefix_in = Tensor::randn({ne, ne}, rng, stddev, true);
        b.mlp_prefix_out = Tensor::randn({ne, mc.d_model}, rng, out_stddev, true);
    }
    if (mc.kinds.lora) {
        b.mlp_lora_in = Tensor::randn({ne, ne}, rng, stddev, true);
        b.mlp_lora_out = Tensor::randn({ne, mc.d_model}, rng, out_stddev, true);
    }
    b.index_map.reserve(static_cast<std::size_t>(m));
    for (const auto& s : bank_slots(mc)) {
        for (int r = 0; r < s.rows; ++r) b.index_map.push_back({s.layer, s.kind, r});
    }
    return h;
}

EncoderOutput Hypernetwork::hyper_encode(std::span<const int> instruction_tokens,
                                         AttentionTrace* trace) const {
    if (!model_) throw ContractError("hyper_encode: hypernetwork not initialized");
    return model_->encode(instruction_tokens, nullptr, trace);
}

PeftSet Hypernetwork::generate(const EncoderOutput& encoded_instruction) const {
    if (!model_) throw ContractError("generate: hypernetwork not initialized");
    if (!has_generator()) {
        throw ContractError("generate: hypernetwork has no generator bank");
    }
    if (encoded_instruction.length() == 0) {
        throw LengthError("generate: empty encoded instruction");
    }
    const ModelConfig& mc = model_->config;
    const GeneratorBank& b = bank_;

    // Pre-norm cross-attention from bank rows over instruction states.
    Tensor h = rmsnorm(b.embed_table, b.cross_norm);
    Tensor q = matmul(h, b.cross.wq);
    Tensor k = matmul(encoded_instruction.states, b.cross.wk);
    Tensor v = matmul(encoded_instruction.states, b.cross.wv);
    Tensor attn = attention(q, k, v, nullptr, /*causal=*/false, mc.heads);
    Tensor ctx = add(b.embed_table, matmul(attn, b.cross.wo));

    std::vector<SlotSpec> slots = bank_slots(mc);

    // Each kind owns one contiguous row region; apply that kind's MLP once.
    auto region_rows = [&](bool (*pred)(SlotKind)) {
        int n = 0;
        for (const auto& s : slots) {
            if (pred(s.kind)) n += s.rows;
        }
        return n;
    };
    int adapter_rows = region_rows(is_adapter_slot);
    int prefix_rows = region_rows(is_prefix_slot);
    int lora_rows = region_rows(is_lora_slot);

    Tensor adapter_block, prefix_block, lora_block;
    int cursor = 0;
    if (adapter_rows > 0) {
        Tensor region = slice_rows(ctx, cursor, adapter_rows);
        adapter_block = matmul(gelu(matmul(region, b.mlp_adapter_in)), b.mlp_adapter_out);
        cursor += adapter_rows;
    }
    if (prefix_rows > 0) {
        Tensor region = slice_rows(ctx, cursor, prefix_rows);
        prefix_block = matmul(gelu(matmul(region, b.mlp_prefix_in)), b.mlp_prefix_out);
        cursor += prefix_rows;
    }
    if (lora_rows > 0) {
        Tensor region = slice_rows(ctx, cursor, lora_rows);
        lora_block = matmul(gelu(matmul(region, b.mlp_lora_in)), b.mlp_lora_out);
        cursor += lora_rows;
    }

    PeftSet set;
    set.kind_flags = mc.kinds;
    set.per_layer.resize(static_cast<std::size_t>(2 * mc.layers));

    int a_cur = 0, p_cur = 0, l_cur = 0;
    for (const auto& s : slots) {
        auto& la = set.per_layer[static_cast<std::size_t>(s.layer)];
        if (is_adapter_slot(s.kind)) {
            Tensor rows = slice_rows(adapter_block, a_cur, s.rows);
            a_cur += s.rows;
            if (!la.adapter) la.adapter = AdapterPair{};
            if (s.kind == SlotKind::adapter_down) {
                la.adapter->down = transpose(rows); // [d x n_a]
            } else {
                la.adapter->up = rows; // [n_a x d]
            }
        } else if (is_prefix_slot(s.kind)) {
            Tensor rows = slice_rows(prefix_block, p_cur, s.rows);
            p_cur += s.rows;
            switch (s.kind) {
                case SlotKind::prefix_self_key:
                    if (!la.self_prefix) la.self_prefix = PrefixPair{};
                    la.self_prefix->keys = rows;
                    break;
                case SlotKind::prefix_self_value:
                    la.self_prefix->values = rows;
                    break;
                case SlotKind::prefix_cross_key:
                    if (!la.cross_prefix) la.cross_prefix = PrefixPair{};
                    la.cross_prefix->keys = rows;
                    break;
                default:
                    la.cross_prefix->values = rows;
                    break;
            }
        } else {
            Tensor rows = slice_rows(lora_block, l_cur, s.rows);
            l_cur += s.rows;
            if (!la.lora) la.lora = LoraSet{};
            switch (s.kind) {
                case SlotKind::lora_q_a: la.lora->q.a = transpose(rows); break;
                case SlotKind::lora_q_b: la.lora->q.b = rows; break;
                case SlotKind::lora_v_a: la.lora->v.a = transpose(rows); break;
                default: la.lora->v.b = rows; break;
            }
        }
    }
    set.validate(mc);
    return set;
}

TaskContext Hypernetwork::build_task_context(const std::string& task_id,
                                             std::span<const int> instruction_tokens) const {
    TaskContext ctx;
    ctx.task_id = task_id;
    ctx.instruction_tokens.assign(instruction_tokens.begin(), instruction_tokens.end());
    ctx.encoded_instruction = hyper_encode(instruction_tokens);
    if (has_generator()) {
        ctx.peft = generate(ctx.encoded_instruction);
        ctx.has_peft = true;
    }
    return ctx;
}

std::vector<std::pair<std::string, Tensor>> Hypernetwork::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    if (!has_generator()) return out;
    out.emplace_back("gen.embed_table", bank_.embed_table);
    out.emplace_back("gen.cross_norm", bank_.cross_norm);
    out.emplace_back("gen.cross.wq", bank_.cross.wq);
    out.emplace_back("gen.cross.wk", bank_.cross.wk);
    out.emplace_back("gen.cross.wv", bank_.cross.wv);
    out.emplace_back("gen.cross.wo", bank_.cross.wo);
    if (bank_.mlp_adapter_in.defined()) {
        out.emplace_back("gen.mlp_adapter.in", bank_.mlp_adapter_in);
        out.emplace_back("gen.mlp_adapter.out", bank_.mlp_adapter_out);
    }
    if (bank_.mlp_prefix_in.defined()) {
        out.emplace_back("gen.mlp_prefix.in", bank_.mlp_prefix_in);
        out.emplace_back("gen.mlp_prefix.out", bank_.mlp_prefix_out);
    }
    if (bank_.mlp_lora_in.defined()) {
        out.emplace_back("gen.mlp_lora.in", bank_.mlp_lora_in);
        out.emplace_back("gen.mlp_lora.out", bank_.mlp_lora_out);
    }
    return out;
}

std::size_t Hypernetwork::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_parameters()) n += t.size();
    return n;
}

EncoderOutput fuse_memory(const EncoderOutput& instruction, const EncoderOutput& input) {
    if (input.length() == 0) {
        throw LengthError("fuse_memory: input states must be non-empty");
    }
    // A zero-row instruction contributes nothing; the memory is the input
    // alone, which keeps fusion a strict superset of the plain model.
    if (instruction.length() == 0) return input;
    EncoderOutput out;
    out.states = concat_rows({instruction.states, input.states});
    return out;
}

} // namespace hint
