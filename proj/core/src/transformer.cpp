#include "hint/transformer.hpp"

#include "hint/errors.hpp"
#include "hint/ops.hpp"
#include "hint/rng.hpp"

#include <cmath>
#include <cstdio>

namespace hint {

namespace {

constexpr double mask_value = -1e30;

// Additive causal mask of shape [len x (prefix + len)]: position i may attend
// to prefix slots and to sequence positions <= i. exp(-1e30 - max) underflows
// to exactly zero, so masked weights are exact zeros after softmax.
Tensor causal_mask(int len, int prefix) {
    Tensor m = Tensor::zeros({len, prefix + len});
    double* p = m.data();
    for (int i = 0; i < len; ++i) {
        double* row = p + static_cast<std::size_t>(i) * (prefix + len);
        for (int j = prefix + i + 1; j < prefix + len; ++j) row[j] = mask_value;
    }
    return m;
}

} // namespace

Tensor attention(const Tensor& q_states, const Tensor& k_states, const Tensor& v_states,
                 const PrefixPair* prefix, bool causal, int num_heads,
                 AttentionTrace::Site* site) {
    if (q_states.ndim() != 2 || k_states.ndim() != 2 || v_states.ndim() != 2) {
        throw ShapeError("attention: states must be 2-D");
    }
    int d = q_states.cols();
    if (k_states.cols() != d || v_states.cols() != d) {
        throw ShapeError("attention: width mismatch " + q_states.shape_str() + " vs " +
                         k_states.shape_str() + " vs " + v_states.shape_str());
    }
    if (k_states.rows() != v_states.rows()) {
        throw ShapeError("attention: key/value count mismatch " + k_states.shape_str() +
                         " vs " + v_states.shape_str());
    }
    if (num_heads < 1 || d % num_heads != 0) {
        throw ShapeError("attention: width " + std::to_string(d) +
                         " not divisible into " + std::to_string(num_heads) + " heads");
    }
    int p = prefix ? prefix->length() : 0;
    if (p > 0 && (prefix->keys.cols() != d || prefix->values.cols() != d ||
                  prefix->values.rows() != p)) {
        throw ShapeError("attention: prefix shapes " + prefix->keys.shape_str() + " / " +
                         prefix->values.shape_str() + " do not match width " +
                         std::to_string(d));
    }
    int lq = q_states.rows();
    int lk = k_states.rows();
    if (causal && lq != lk) {
        throw ShapeError("attention: causal mask needs square scores, got " +
                         std::to_string(lq) + " queries over " + std::to_string(lk) +
                         " keys");
    }
    int hd = d / num_heads;
    double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    Tensor mask;
    if (causal) mask = causal_mask(lq, p);

    std::vector<Tensor> head_outputs;
    head_outputs.reserve(static_cast<std::size_t>(num_heads));
    for (int h = 0; h < num_heads; ++h) {
        int c0 = h * hd;
        Tensor qh = slice_cols(q_states, c0, hd);
        Tensor kh = slice_cols(k_states, c0, hd);
        Tensor vh = slice_cols(v_states, c0, hd);
        if (p > 0) {
            kh = concat_rows({slice_cols(prefix->keys, c0, hd), kh});
            vh = concat_rows({slice_cols(prefix->values, c0, hd), vh});
        }
        Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
        if (causal) scores = add(scores, mask);
        Tensor w = softmax_rows(scores);
        head_outputs.push_back(matmul(w, vh));
    }
    Tensor out = num_heads == 1 ? head_outputs[0] : concat_cols(head_outputs);
    if (site) {
        site->rows = lq;
        site->cols = p + lk;
        site->prefix = p;
        site->causal = causal;
    }
    return out;
}

namespace {

struct TraceSink {
    AttentionTrace* trace;
    const char* site_name;
    int layer;

    AttentionTrace::Site* slot() {
        if (!trace) return nullptr;
        trace->sites.emplace_back();
        auto& s = trace->sites.back();
        s.site = site_name;
        s.layer = layer;
        return &s;
    }
};

Tensor self_attention_block(const Tensor& x, const Tensor& norm_gain,
                            const AttentionWeights& w, const PrefixPair* prefix,
                            const LoraSet* lora, bool causal, int heads,
                            AttentionTrace::Site* site) {
    Tensor h = rmsnorm(x, norm_gain);
    Tensor q = lora ? lora_forward(h, w.wq, lora->q) : matmul(h, w.wq);
    Tensor k = matmul(h, w.wk);
    Tensor v = lora ? lora_forward(h, w.wv, lora->v) : matmul(h, w.wv);
    Tensor attn = attention(q, k, v, prefix, causal, heads, site);
    return add(x, matmul(attn, w.wo));
}

Tensor cross_attention_block(const Tensor& x, const Tensor& norm_gain,
                             const AttentionWeights& w, const Tensor& memory,
                             const PrefixPair* prefix, int heads,
                             AttentionTrace::Site* site) {
    Tensor h = rmsnorm(x, norm_gain);
    Tensor q = matmul(h, w.wq);
    Tensor k = matmul(memory, w.wk);
    Tensor v = matmul(memory, w.wv);
    Tensor attn = attention(q, k, v, prefix, /*causal=*/false, heads, site);
    return add(x, matmul(attn, w.wo));
}

// Pre-norm FFN with an optional parallel adapter. The adapter reads the same
// normalized input the FFN sees and its path joins the FFN output before the
// residual add.
Tensor ffn_block(const Tensor& x, const Tensor& norm_gain, const Tensor& ffn_in,
                 const Tensor& ffn_out, const AdapterPair* adapter) {
    Tensor h = rmsnorm(x, norm_gain);
    Tensor f = matmul(gelu(matmul(h, ffn_in)), ffn_out);
    if (adapter) f = adapter_forward(h, f, *adapter);
    return add(x, f);
}

AttentionWeights init_attention(int d, Rng& rng, double stddev) {
    return AttentionWeights{
        Tensor::randn({d, d}, rng, stddev, true),
        Tensor::randn({d, d}, rng, stddev, true),
        Tensor::randn({d, d}, rng, stddev, true),
        Tensor::randn({d, d}, rng, stddev, true),
    };
}

} // namespace

TransformerModel TransformerModel::init(const ModelConfig& mc, Rng& rng) {
    mc.validate();
    constexpr double stddev = 0.02;
    TransformerModel m;
    m.config = mc;
    m.tok_embed = Tensor::randn({mc.vocab_size, mc.d_model}, rng, stddev, true);
    m.enc_pos = Tensor::randn({mc.max_seq_len, mc.d_model}, rng, stddev, true);
    m.dec_pos = Tensor::randn({mc.max_seq_len, mc.d_model}, rng, stddev, true);
    for (int i = 0; i < mc.layers; ++i) {
        EncoderLayerWeights lw;
        lw.norm_attn = Tensor::full({mc.d_model}, 1.0, true);
        lw.self_attn = init_attention(mc.d_model, rng, stddev);
        lw.norm_ffn = Tensor::full({mc.d_model}, 1.0, true);
        lw.ffn_in = Tensor::randn({mc.d_model, mc.ffn_dim}, rng, stddev, true);
        lw.ffn_out = Tensor::randn({mc.ffn_dim, mc.d_model}, rng, stddev, true);
        m.enc_layers.push_back(std::move(lw));
    }
    for (int i = 0; i < mc.layers; ++i) {
        DecoderLayerWeights lw;
        lw.norm_self = Tensor::full({mc.d_model}, 1.0, true);
        lw.self_attn = init_attention(mc.d_model, rng, stddev);
        lw.norm_cross = Tensor::full({mc.d_model}, 1.0, true);
        lw.cross_attn = init_attention(mc.d_model, rng, stddev);
        lw.norm_ffn = Tensor::full({mc.d_model}, 1.0, true);
        lw.ffn_in = Tensor::randn({mc.d_model, mc.ffn_dim}, rng, stddev, true);
        lw.ffn_out = Tensor::randn({mc.ffn_dim, mc.d_model}, rng, stddev, true);
        m.dec_layers.push_back(std::move(lw));
    }
    m.enc_final_norm = Tensor::full({mc.d_model}, 1.0, true);
    m.dec_final_norm = Tensor::full({mc.d_model}, 1.0, true);
    m.out_proj = Tensor::randn({mc.d_model, mc.vocab_size}, rng, stddev, true);
    return m;
}

std::vector<std::pair<std::string, Tensor>> TransformerModel::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("tok_embed", tok_embed);
    out.emplace_back("enc_pos", enc_pos);
    out.emplace_back("dec_pos", dec_pos);
    char buf[64];
    for (std::size_t i = 0; i < enc_layers.size(); ++i) {
        const auto& lw = enc_layers[i];
        auto name = [&](const char* suffix) {
            std::snprintf(buf, sizeof(buf), "enc.%zu.%s", i, suffix);
            return std::string(buf);
        };
        out.emplace_back(name("norm_attn"), lw.norm_attn);
        out.emplace_back(name("self.wq"), lw.self_attn.wq);
        out.emplace_back(name("self.wk"), lw.self_attn.wk);
        out.emplace_back(name("self.wv"), lw.self_attn.wv);
        out.emplace_back(name("self.wo"), lw.self_attn.wo);
        out.emplace_back(name("norm_ffn"), lw.norm_ffn);
        out.emplace_back(name("ffn_in"), lw.ffn_in);
        out.emplace_back(name("ffn_out"), lw.ffn_out);
    }
    for (std::size_t i = 0; i < dec_layers.size(); ++i) {
        const auto& lw = dec_layers[i];
        auto name = [&](const char* suffix) {
            std::snprintf(buf, sizeof(buf), "dec.%zu.%s", i, suffix);
            return std::string(buf);
        };
        out.emplace_back(name("norm_self"), lw.norm_self);
        out.emplace_back(name("self.wq"), lw.self_attn.wq);
        out.emplace_back(name("self.wk"), lw.self_attn.wk);
        out.emplace_back(name("self.wv"), lw.self_attn.wv);
        out.emplace_back(name("self.wo"), lw.self_attn.wo);
        out.emplace_back(name("norm_cross"), lw.norm_cross);
        out.emplace_back(name("cross.wq"), lw.cross_attn.wq);
        out.emplace_back(name("cross.wk"), lw.cross_attn.wk);
        out.emplace_back(name("cross.wv"), lw.cross_attn.wv);
        out.emplace_back(name("cross.wo"), lw.cross_attn.wo);
        out.emplace_back(name("norm_ffn"), lw.norm_ffn);
        out.emplace_back(name("ffn_in"), lw.ffn_in);
        out.emplace_back(name("ffn_out"), lw.ffn_out);
    }
    out.emplace_back("enc_final_norm", enc_final_norm);
    out.emplace_back("dec_final_norm", dec_final_norm);
    out.emplace_back("out_proj", out_proj);
    return out;
}

std::size_t TransformerModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_parameters()) n += t.size();
    return n;
}

EncoderOutput TransformerModel::encode(std::span<const int> tokens, const PeftSet* peft,
                                       AttentionTrace* trace) const {
    int len = static_cast<int>(tokens.size());
    if (len == 0) throw LengthError("encode: empty token sequence");
    if (len > config.max_seq_len) {
        throw LengthError("encode: sequence length " + std::to_string(len) +
                          " exceeds max_seq_len " + std::to_string(config.max_seq_len));
    }
    if (peft) peft->validate(config);
    std::vector<int> positions(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) positions[static_cast<std::size_t>(i)] = i;
    Tensor x = add(embedding_lookup(tok_embed, tokens),
                   embedding_lookup(enc_pos, positions));
    for (std::size_t i = 0; i < enc_layers.size(); ++i) {
        const auto& lw = enc_layers[i];
        const LayerAdaptation* la = peft ? peft->layer(static_cast<int>(i)) : nullptr;
        TraceSink sink{trace, "enc.self", static_cast<int>(i)};
        x = self_attention_block(x, lw.norm_attn, lw.self_attn,
                                 la && la->self_prefix ? &*la->self_prefix : nullptr,
                                 la && la->lora ? &*la->lora : nullptr,
                                 /*causal=*/false, config.heads, sink.slot());
        x = ffn_block(x, lw.norm_ffn, lw.ffn_in, lw.ffn_out,
                      la && la->adapter ? &*la->adapter : nullptr);
    }
    EncoderOutput out;
    out.states = rmsnorm(x, enc_final_norm);
    return out;
}

Tensor TransformerModel::decode_logits(const EncoderOutput& memory,
                                       std::span<const int> decoder_input,
                                       const PeftSet* peft, AttentionTrace* trace) const {
    int len = static_cast<int>(decoder_input.size());
    if (len == 0) throw LengthError("decode: empty decoder input");
    if (len > config.max_seq_len) {
        throw LengthError("decode: sequence length " + std::to_string(len) +
                          " exceeds max_seq_len " + std::to_string(config.max_seq_len));
    }
    if (memory.length() == 0) throw LengthError("decode: empty encoder memory");
    if (peft) peft->validate(config);
    std::vector<int> positions(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) positions[static_cast<std::size_t>(i)] = i;
    Tensor x = add(embedding_lookup(tok_embed, decoder_input),
                   embedding_lookup(dec_pos, positions));
    int nl = config.layers;
    for (std::size_t i = 0; i < dec_layers.size(); ++i) {
        const auto& lw = dec_layers[i];
        const LayerAdaptation* la = peft ? peft->layer(nl + static_cast<int>(i)) : nullptr;
        TraceSink self_sink{trace, "dec.self", static_cast<int>(i)};
        x = self_attention_block(x, lw.norm_self, lw.self_attn,
                                 la && la->self_prefix ? &*la->self_prefix : nullptr,
                                 la && la->lora ? &*la->lora : nullptr,
                                 /*causal=*/true, config.heads, self_sink.slot());
        TraceSink cross_sink{trace, "dec.cross", static_cast<int>(i)};
        x = cross_attention_block(x, lw.norm_cross, lw.cross_attn, memory.states,
                                  la && la->cross_prefix ? &*la->cross_prefix : nullptr,
                                  config.heads, cross_sink.slot());
        x = ffn_block(x, lw.norm_ffn, lw.ffn_in, lw.ffn_out,
                      la && la->adapter ? &*la->adapter : nullptr);
    }
    Tensor h = rmsnorm(x, dec_final_norm);
    return matmul(h, out_proj);
}

std::vector<int> TransformerModel::greedy_decode(const EncoderOutput& memory,
                                                 const PeftSet* peft, int max_len,
                                                 int bos_id, int eos_id) const {
    NoGradGuard guard;
    std::vector<int> generated;
    std::vector<int> input{bos_id};
    for (int step = 0; step < max_len; ++step) {
        Tensor logits = decode_logits(memory, input, peft);
        int last = logits.rows() - 1;
        const double* row = logits.data() + static_cast<std::size_t>(last) * logits.cols();
        int best = 0;
        for (int j = 1; j < logits.cols(); ++j) {
            if (row[j] > row[best]) best = j;
        }
        if (best == eos_id) break;
        generated.push_back(best);
        input.push_back(best);
        if (static_cast<int>(input.size()) > config.max_seq_len) break;
    }
    return generated;
}

} // namespace hint
