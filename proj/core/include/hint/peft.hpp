#pragma once

#include "hint/config.hpp"
#include "hint/tensor.hpp"

#include <optional>
#include <vector>

namespace hint {

// Generated (or hand-built) parameter-efficient modules for one layer.
// Layer order in PeftSet::per_layer: encoder blocks first, then decoder
// blocks. cross_prefix is only populated for decoder layers.

struct AdapterPair {
    Tensor down; // [d x n_a]
    Tensor up;   // [n_a x d]
};

struct PrefixPair {
    Tensor keys;   // [p x d], concatenated head columns, no position embedding
    Tensor values; // [p x d]
    int length() const { return keys.defined() ? keys.rows() : 0; }
};

struct LoraPair {
    Tensor a; // [d x r]
    Tensor b; // [r x d]
};

// Low-rank deltas on the query and value projections of self-attention.
struct LoraSet {
    LoraPair q;
    LoraPair v;
};

struct LayerAdaptation {
    std::optional<AdapterPair> adapter;
    std::optional<PrefixPair> self_prefix;
    std::optional<PrefixPair> cross_prefix;
    std::optional<LoraSet> lora;
};

struct PeftSet {
    std::vector<LayerAdaptation> per_layer;
    PeftKinds kind_flags;

    const LayerAdaptation* layer(int idx) const;
    // Shape/length checks against a config. Prefix length 0 (identity) or
    // config.prefix_length are both accepted.
    void validate(const ModelConfig& mc) const;
    std::size_t parameter_count() const;
    std::vector<std::pair<std::string, Tensor>> named_arrays() const;
};

// Adapter applied in parallel with the FFN: reads the FFN input, adds its
// bottleneck path to the FFN output.
Tensor adapter_forward(const Tensor& x, const Tensor& ffn_out,
                       const AdapterPair& adapter);

// x * W plus the rank-r delta x * a * b scaled by 1/r.
Tensor lora_forward(const Tensor& x, const Tensor& base_w, const LoraPair& lora);

// Structural no-op: zero-length prefixes, zero adapters and zero lora deltas.
// Injecting it leaves the forward pass bit-identical to running without any
// modules. (Zero-valued prefixes of nonzero length would NOT be a no-op: even
// zero keys contribute softmax mass.)
PeftSet make_identity_peft(const ModelConfig& mc);

} // namespace hint
