#include "hint/peft.hpp"

#include "hint/errors.hpp"
#include "hint/ops.hpp"

#include <cstdio>

namespace hint {

const LayerAdaptation* PeftSet::layer(int idx) const {
    if (idx < 0 || idx >= static_cast<int>(per_layer.size())) {
        throw ContractError("PeftSet::layer index " + std::to_string(idx) +
                            " out of range (" + std::to_string(per_layer.size()) +
                            " layers)");
    }
    return &per_layer[static_cast<std::size_t>(idx)];
}

void PeftSet::validate(const ModelConfig& mc) const {
    if (static_cast<int>(per_layer.size()) != 2 * mc.layers) {
        throw ContractError("PeftSet covers " + std::to_string(per_layer.size()) +
                            " layers, model has " + std::to_string(2 * mc.layers));
    }
    auto check_prefix = [&](const PrefixPair& p, const char* where) {
        int len = p.length();
        if (len != 0 && len != mc.prefix_length) {
            throw ContractError(std::string(where) + ": prefix length " +
                                std::to_string(len) + " is neither 0 nor " +
                                std::to_string(mc.prefix_length));
        }
        if (len > 0) {
            if (p.keys.cols() != mc.d_model || p.values.cols() != mc.d_model ||
                p.values.rows() != len) {
                throw ContractError(std::string(where) + ": prefix shape mismatch " +
                                    p.keys.shape_str() + " / " + p.values.shape_str());
            }
        }
    };
    for (std::size_t i = 0; i < per_layer.size(); ++i) {
        const auto& la = per_layer[i];
        bool is_decoder = static_cast<int>(i) >= mc.layers;
        if (la.adapter) {
            const auto& a = *la.adapter;
            if (a.down.rows() != mc.d_model || a.down.cols() != mc.adapter_bottleneck ||
                a.up.rows() != mc.adapter_bottleneck || a.up.cols() != mc.d_model) {
                throw ContractError("layer " + std::to_string(i) + ": adapter shapes " +
                                    a.down.shape_str() + " / " + a.up.shape_str() +
                                    " do not match config");
            }
        }
        if (la.self_prefix) check_prefix(*la.self_prefix, "self_prefix");
        if (la.cross_prefix) {
            if (!is_decoder) {
                throw ContractError("layer " + std::to_string(i) +
                                    ": cross_prefix on an encoder layer");
            }
            check_prefix(*la.cross_prefix, "cross_prefix");
        }
        if (la.lora) {
            auto check_pair = [&](const LoraPair& lp) {
                if (lp.a.rows() != mc.d_model || lp.a.cols() != mc.lora_rank ||
                    lp.b.rows() != mc.lora_rank || lp.b.cols() != mc.d_model) {
                    throw ContractError("layer " + std::to_string(i) + ": lora shapes " +
                                        lp.a.shape_str() + " / " + lp.b.shape_str() +
                                        " do not match config");
                }
            };
            check_pair(la.lora->q);
            check_pair(la.lora->v);
        }
    }
}

std::size_t PeftSet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& la : per_layer) {
        if (la.adapter) n += la.adapter->down.size() + la.adapter->up.size();
        if (la.self_prefix) n += la.self_prefix->keys.size() + la.self_prefix->values.size();
        if (la.cross_prefix) n += la.cross_prefix->keys.size() + la.cross_prefix->values.size();
        if (la.lora) {
            n += la.lora->q.a.size() + la.lora->q.b.size();
            n += la.lora->v.a.size() + la.lora->v.b.size();
        }
    }
    return n;
}

std::vector<std::pair<std::string, Tensor>> PeftSet::named_arrays() const {
    std::vector<std::pair<std::string, Tensor>> out;
    char buf[64];
    for (std::size_t i = 0; i < per_layer.size(); ++i) {
        const auto& la = per_layer[i];
        auto name = [&](const char* suffix) {
            std::snprintf(buf, sizeof(buf), "layer%02zu.%s", i, suffix);
            return std::string(buf);
        };
        if (la.adapter) {
            out.emplace_back(name("adapter.down"), la.adapter->down);
            out.emplace_back(name("adapter.up"), la.adapter->up);
        }
        if (la.self_prefix && la.self_prefix->length() > 0) {
            out.emplace_back(name("prefix_self.keys"), la.self_prefix->keys);
            out.emplace_back(name("prefix_self.values"), la.self_prefix->values);
        }
        if (la.cross_prefix && la.cross_prefix->length() > 0) {
            out.emplace_back(name("prefix_cross.keys"), la.cross_prefix->keys);
            out.emplace_back(name("prefix_cross.values"), la.cross_prefix->values);
        }
        if (la.lora) {
            out.emplace_back(name("lora.q_a"), la.lora->q.a);
            out.emplace_back(name("lora.q_b"), la.lora->q.b);
            out.emplace_back(name("lora.v_a"), la.lora->v.a);
            out.emplace_back(name("lora.v_b"), la.lora->v.b);
        }
    }
    return out;
}

Tensor adapter_forward(const Tensor& x, const Tensor& ffn_out,
                       const AdapterPair& adapter) {
    Tensor h = gelu(matmul(x, adapter.down));
    return add(ffn_out, matmul(h, adapter.up));
}

Tensor lora_forward(const Tensor& x, const Tensor& base_w, const LoraPair& lora) {
    Tensor base = matmul(x, base_w);
    int r = lora.a.cols();
    Tensor delta = scale(matmul(matmul(x, lora.a), lora.b), 1.0 / static_cast<double>(r));
    return add(base, delta);
}

PeftSet make_identity_peft(const ModelConfig& mc) {
    PeftSet set;
    set.kind_flags = mc.kinds;
    set.per_layer.resize(static_cast<std::size_t>(2 * mc.layers));
    for (int i = 0; i < 2 * mc.layers; ++i) {
        auto& la = set.per_layer[static_cast<std::size_t>(i)];
        bool is_decoder = i >= mc.layers;
        if (mc.kinds.adapters) {
            la.adapter = AdapterPair{Tensor::zeros({mc.d_model, mc.adapter_bottleneck}),
                                     Tensor::zeros({mc.adapter_bottleneck, mc.d_model})};
        }
        if (mc.kinds.prefixes) {
            la.self_prefix = PrefixPair{}; // zero length
            if (is_decoder) la.cross_prefix = PrefixPair{};
        }
        if (mc.kinds.lora) {
            la.lora = LoraSet{
                LoraPair{Tensor::zeros({mc.d_model, mc.lora_rank}),
                         Tensor::zeros({mc.lora_rank, mc.d_model})},
                LoraPair{Tensor::zeros({mc.d_model, mc.lora_rank}),
                         Tensor::zeros({mc.lora_rank, mc.d_model})},
            };
        }
    }
    return set;
}

} // namespace hint
