#pragma once

#include "hint/config.hpp"
#include "hint/peft.hpp"
#include "hint/tensor.hpp"

#include <span>
#include <string>
#include <vector>

namespace hint {

class Rng;

// Per-call attention audit record: rows = query count, cols = score width
// (prefix length + key count). Collected when a trace sink is supplied.
struct AttentionTrace {
    struct Site {
        std::string site;
        int layer = 0;
        int rows = 0;
        int cols = 0;
        int prefix = 0;
        bool causal = false;
    };
    std::vector<Site> sites;
};

// Multi-head scaled dot-product attention over packed [len x d] states.
// Optional prefix keys/values are prepended per head and are always
// attendable: the causal mask covers only true sequence positions, and
// prefixes receive no position information. `causal` requires Lq == Lk.
Tensor attention(const Tensor& q_states, const Tensor& k_states, const Tensor& v_states,
                 const PrefixPair* prefix, bool causal, int num_heads,
                 AttentionTrace::Site* site = nullptr);

struct AttentionWeights {
    Tensor wq, wk, wv, wo; // each [d x d]
};

struct EncoderLayerWeights {
    Tensor norm_attn;
    AttentionWeights self_attn;
    Tensor norm_ffn;
    Tensor ffn_in;  // [d x ffn]
    Tensor ffn_out; // [ffn x d]
};

struct DecoderLayerWeights {
    Tensor norm_self;
    AttentionWeights self_attn;
    Tensor norm_cross;
    AttentionWeights cross_attn;
    Tensor norm_ffn;
    Tensor ffn_in;
    Tensor ffn_out;
};

struct EncoderOutput {
    Tensor states; // [len x d]
    int length() const { return states.defined() ? states.rows() : 0; }
};

// Encoder-decoder transformer: pre-norm RMSNorm blocks, learned absolute
// position embeddings per stack, plain GELU FFNs, no biases anywhere,
// untied output projection.
struct TransformerModel {
    ModelConfig config;
    Tensor tok_embed; // [vocab x d]
    Tensor enc_pos;   // [max_seq x d]
    Tensor dec_pos;
    std::vector<EncoderLayerWeights> enc_layers;
    std::vector<DecoderLayerWeights> dec_layers;
    Tensor enc_final_norm;
    Tensor dec_final_norm;
    Tensor out_proj; // [d x vocab]

    static TransformerModel init(const ModelConfig& mc, Rng& rng);

    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    std::size_t parameter_count() const;

    // peft may be null (run the plain backbone). For the encoder, layer i of
    // the PeftSet adapts encoder block i.
    EncoderOutput encode(std::span<const int> tokens, const PeftSet* peft,
                         AttentionTrace* trace = nullptr) const;

    // Teacher-forced pass over the whole prefix; returns [len x vocab]
    // logits. Decoder block j uses PeftSet layer (config.layers + j).
    Tensor decode_logits(const EncoderOutput& memory, std::span<const int> decoder_input,
                         const PeftSet* peft, AttentionTrace* trace = nullptr) const;

    // Greedy argmax decoding (first max wins on ties). Emits token ids until
    // eos or max_len; the returned sequence excludes bos/eos.
    std::vector<int> greedy_decode(const EncoderOutput& memory, const PeftSet* peft,
                                   int max_len, int bos_id, int eos_id) const;
};

} // namespace hint
