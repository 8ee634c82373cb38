#include "hint/training.hpp"

#include "hint/errors.hpp"
#include "hint/ops.hpp"
#include "hint/tokenizer.hpp"

#include <chrono>
#include <cmath>
#include <map>

namespace hint {

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, double learning_rate,
                             double grad_clip)
    : params_(std::move(params)), lr_(learning_rate), clip_(grad_clip) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
        if (!p.defined()) throw ContractError("AdamOptimizer: undefined parameter");
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void AdamOptimizer::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

double AdamOptimizer::step() {
    double sq = 0.0;
    for (const auto& p : params_) {
        if (!p.has_grad()) continue;
        const double* g = p.grad();
        for (std::size_t i = 0; i < p.size(); ++i) sq += g[i] * g[i];
    }
    double norm = std::sqrt(sq);
    double factor = (clip_ > 0.0 && norm > clip_) ? clip_ / norm : 1.0;
    ++t_;
    double bc1 = 1.0 - std::pow(beta1, t_);
    double bc2 = 1.0 - std::pow(beta2, t_);
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor& p = params_[pi];
        if (!p.has_grad()) continue;
        const double* g = p.grad();
        double* m = m_[pi].data();
        double* v = v_[pi].data();
        double* w = p.data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            double gi = g[i] * factor;
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps);
        }
    }
    return norm;
}

namespace {

// Loss given an already-encoded instruction and generated modules, so a
// batch can share one generation across items with identical instructions.
Tensor item_loss_with(const TransformerModel& model, const BatchItem& item,
                      const EncoderOutput& instr, const PeftSet* peft,
                      bool use_fusion) {
    if (item.target_tokens.empty()) throw DataError("item_loss: empty target");
    EncoderOutput enc = model.encode(item.model_tokens, peft);
    EncoderOutput memory = use_fusion ? fuse_memory(instr, enc) : enc;
    std::vector<int> dec_input;
    dec_input.reserve(item.target_tokens.size());
    dec_input.push_back(ByteTokenizer::bos_id);
    for (std::size_t i = 0; i + 1 < item.target_tokens.size(); ++i) {
        dec_input.push_back(item.target_tokens[i]);
    }
    Tensor logits = model.decode_logits(memory, dec_input, peft);
    return cross_entropy_mean(logits, item.target_tokens);
}

} // namespace

Tensor item_loss(const TransformerModel& model, const Hypernetwork& hyper,
                 const BatchItem& item, bool use_generator, bool use_fusion) {
    if (item.target_tokens.empty()) throw DataError("item_loss: empty target");
    const PeftSet* peft = nullptr;
    PeftSet generated;
    EncoderOutput instr;
    if (use_generator || use_fusion) {
        if (item.hyper_tokens.empty()) {
            throw DataError("item_loss: hint example without instruction tokens");
        }
        instr = hyper.hyper_encode(item.hyper_tokens);
        if (use_generator) {
            generated = hyper.generate(instr);
            peft = &generated;
        }
    }
    return item_loss_with(model, item, instr, peft, use_fusion);
}

Trainer::Trainer(const ModelConfig& mc, const TrainConfig& tc)
    : mc_(mc),
      tc_(tc),
      data_rng_(Rng::substream(tc.seed, "data")),
      chunk_rng_(Rng::substream(tc.seed, "chunks")) {
    tc_.validate();
    mc_.kinds = effective_kinds(mc.kinds, tc.ablation);
    mc_.validate();
    Rng init_rng = Rng::substream(tc.seed, "init");
    model_ = TransformerModel::init(mc_, init_rng);
    hyper_ = Hypernetwork::init(&model_, init_rng, generator_enabled(tc_));
    build_optimizer();
}

Trainer::Trainer(const CheckpointData& ck, const TrainConfig& tc)
    : mc_(ck.model_config),
      tc_(tc),
      data_rng_(Rng::substream(tc.seed, "data")),
      chunk_rng_(Rng::substream(tc.seed, "chunks")) {
    tc_.validate();
    PeftKinds wanted = effective_kinds(ck.model_config.kinds, tc.ablation);
    if (generator_enabled(tc_)) {
        if (!ck.has_generator) {
            throw ConfigError("checkpoint has no generator bank but the run needs one");
        }
        if (!(wanted == ck.model_config.kinds)) {
            throw ConfigError("checkpoint generator was built for kinds {" +
                              std::string(ck.model_config.kinds.adapters ? "adapters " : "") +
                              std::string(ck.model_config.kinds.prefixes ? "prefixes " : "") +
                              std::string(ck.model_config.kinds.lora ? "lora" : "") +
                              "}; requested ablation needs a different bank");
        }
    }
    mc_.validate();
    Rng init_rng = Rng::substream(tc.seed, "init");
    model_ = TransformerModel::init(mc_, init_rng);
    hyper_ = Hypernetwork::init(&model_, init_rng, ck.has_generator);
    apply_checkpoint_arrays(ck, model_, hyper_);
    build_optimizer();
}

void Trainer::build_optimizer() {
    std::vector<Tensor> params;
    for (const auto& [name, t] : model_.named_parameters()) params.push_back(t);
    for (const auto& [name, t] : hyper_.named_parameters()) params.push_back(t);
    opt_ = std::make_unique<AdamOptimizer>(std::move(params), tc_.learning_rate,
                                           tc_.grad_clip);
}

StepResult Trainer::train_step(const Batch& batch) {
    if (batch.items.empty()) throw ContractError("train_step: empty batch");
    opt_->zero_grad();
    bool use_gen = generator_enabled(tc_);
    bool use_fus = fusion_enabled(tc_);
    // Items with identical instruction tokens share one encode+generate
    // subgraph. Generation is deterministic given the current weights, so
    // each item's loss is unchanged; gradients through the shared nodes
    // accumulate across its users exactly as separate copies would.
    std::map<std::vector<int>, std::pair<EncoderOutput, PeftSet>> shared;
    Tensor total;
    for (const auto& item : batch.items) {
        Tensor l;
        if (use_gen || use_fus) {
            if (item.hyper_tokens.empty()) {
                throw DataError("item_loss: hint example without instruction tokens");
            }
            auto it = shared.find(item.hyper_tokens);
            if (it == shared.end()) {
                EncoderOutput instr = hyper_.hyper_encode(item.hyper_tokens);
                PeftSet generated;
                if (use_gen) generated = hyper_.generate(instr);
                it = shared
                         .emplace(item.hyper_tokens,
                                  std::make_pair(std::move(instr), std::move(generated)))
                         .first;
            }
            l = item_loss_with(model_, item, it->second.first,
                               use_gen ? &it->second.second : nullptr, use_fus);
        } else {
            l = item_loss_with(model_, item, EncoderOutput{}, nullptr, false);
        }
        total = total.defined() ? add(total, l) : l;
    }
    Tensor loss = scale(total, 1.0 / static_cast<double>(batch.items.size()));
    double lv = loss.item();
    if (!std::isfinite(lv) || lv > 1e3) {
        throw DivergenceError(step_, "loss " + std::to_string(lv) + " at step " +
                                         std::to_string(step_) + "; training diverged");
    }
    backward(loss);
    double gnorm = opt_->step();
    if (!std::isfinite(gnorm)) {
        throw DivergenceError(step_, "non-finite gradient norm at step " +
                                         std::to_string(step_));
    }
    ++step_;
    return {lv, gnorm};
}

Batch Trainer::sample_pretrain_batch(CorpusStream& stream) {
    if (tc_.setting != RunSetting::hint) {
        throw ConfigError("pretraining is defined for the hint setting only");
    }
    Batch batch;
    for (int i = 0; i < tc_.batch_size; ++i) {
        std::vector<int> seq = stream.next_sequence();
        ChunkTriple t = chunk_split(seq, chunk_rng_);
        BatchItem item;
        item.task_id = "corpus";
        item.hyper_tokens = std::move(t.a);
        item.hyper_tokens.push_back(ByteTokenizer::eos_id);
        item.model_tokens = std::move(t.c);
        item.model_tokens.push_back(ByteTokenizer::eos_id);
        item.target_tokens = std::move(t.b);
        item.target_tokens.push_back(ByteTokenizer::eos_id);
        batch.items.push_back(std::move(item));
    }
    return batch;
}

Batch Trainer::sample_finetune_batch(const TaskSuite& suite) {
    std::vector<std::string> ids = suite.train_ids();
    if (ids.empty()) throw DataError("task suite has no training tasks");
    Batch batch;
    // Few-shot exemplars are drawn once per task per batch: items of the same
    // task then share instruction tokens, so the step shares their generation.
    std::map<std::string, std::vector<ExamplePair>> batch_shots;
    for (int i = 0; i < tc_.batch_size; ++i) {
        const SyntheticTask& task =
            suite.task(ids[static_cast<std::size_t>(data_rng_.uniform_int(
                0, static_cast<int>(ids.size()) - 1))]);
        ExamplePair instance = suite.sample_train_instance(task, data_rng_);
        bool with_shots = tc_.fewshot_k > 0 && data_rng_.uniform() < tc_.fewshot_mix;
        int shots = with_shots ? tc_.fewshot_k : 0;
        std::vector<ExamplePair> chosen;
        if (shots > 0) {
            auto found = batch_shots.find(task.task_id);
            if (found != batch_shots.end()) {
                chosen = found->second;
            } else {
                int pool = static_cast<int>(task.few_shot_pool.size());
                if (shots > pool) {
                    throw DataError("few-shot pool of '" + task.task_id + "' has " +
                                    std::to_string(pool) + " examples, need " +
                                    std::to_string(shots));
                }
                std::vector<int> picked;
                while (static_cast<int>(picked.size()) < shots) {
                    int idx = data_rng_.uniform_int(0, pool - 1);
                    bool dup = false;
                    for (int p : picked) {
                        if (p == idx) { dup = true; break; }
                    }
                    if (!dup) picked.push_back(idx);
                }
                for (int idx : picked) {
                    chosen.push_back(task.few_shot_pool[static_cast<std::size_t>(idx)]);
                }
                batch_shots.emplace(task.task_id, chosen);
            }
        }
        PromptFormat fmt;
        switch (tc_.setting) {
            case RunSetting::hint:
                fmt = shots > 0 ? PromptFormat::def_plus_pos : PromptFormat::def_only;
                break;
            case RunSetting::concat_baseline:
                fmt = PromptFormat::concat_baseline;
                break;
            default:
                fmt = PromptFormat::no_instruct;
                shots = 0;
                chosen.clear();
                break;
        }
        FormattedExample fe = format_example(task, instance, fmt, shots, chosen);
        batch.items.push_back(BatchItem{std::move(fe.hyper_tokens),
                                        std::move(fe.model_tokens),
                                        std::move(fe.target_tokens), task.task_id});
    }
    return batch;
}

namespace {

TrainResult run_loop(Trainer& trainer, int steps, const Trainer::LogCallback& on_log,
                     const std::function<Batch()>& next_batch) {
    TrainResult result;
    result.rows.reserve(static_cast<std::size_t>(steps));
    for (int s = 0; s < steps; ++s) {
        auto t0 = std::chrono::steady_clock::now();
        Batch batch = next_batch();
        StepResult r = trainer.train_step(batch);
        auto t1 = std::chrono::steady_clock::now();
        TrainLogRow row;
        row.step = s;
        row.loss = r.loss;
        row.grad_norm = r.grad_norm;
        row.millis = std::chrono::duration<double, std::milli>(t1 - t0).count();
        result.rows.push_back(row);
        if (on_log && (s % trainer.train_config().log_every == 0 || s == steps - 1)) {
            on_log(row);
        }
    }
    result.final_loss = result.rows.empty() ? 0.0 : result.rows.back().loss;
    return result;
}

} // namespace

TrainResult Trainer::run_pretrain(CorpusStream& stream, const LogCallback& on_log) {
    if (tc_.mode != TrainMode::pretrain) {
        throw ConfigError("run_pretrain called with mode=" + std::string(to_string(tc_.mode)));
    }
    return run_loop(*this, tc_.steps, on_log,
                    [&]() { return sample_pretrain_batch(stream); });
}

TrainResult Trainer::run_finetune(const TaskSuite& suite, const LogCallback& on_log) {
    if (tc_.mode != TrainMode::finetune) {
        throw ConfigError("run_finetune called with mode=" + std::string(to_string(tc_.mode)));
    }
    return run_loop(*this, tc_.steps, on_log,
                    [&]() { return sample_finetune_batch(suite); });
}

std::string predict_with_context(const TransformerModel& model, const TaskContext* ctx,
                                 std::span<const int> model_tokens, bool use_fusion,
                                 int max_decode_len) {
    NoGradGuard guard;
    const PeftSet* peft = (ctx && ctx->has_peft) ? &ctx->peft : nullptr;
    EncoderOutput enc = model.encode(model_tokens, peft);
    EncoderOutput memory = enc;
    if (use_fusion) {
        if (!ctx) throw ContractError("predict_with_context: fusion without a context");
        memory = fuse_memory(ctx->encoded_instruction, enc);
    }
    std::vector<int> ids = model.greedy_decode(memory, peft, max_decode_len,
                                               ByteTokenizer::bos_id,
                                               ByteTokenizer::eos_id);
    return ByteTokenizer().decode(ids);
}

EvalSummary evaluate(const TransformerModel& model, const Hypernetwork& hyper,
                     const TaskSuite& suite, const EvalOptions& opt,
                     const ContextProvider& provider) {
    if (opt.instances < 1 || opt.instances > TaskSuite::eval_block_size) {
        throw ConfigError("evaluate: instances must be in [1, " +
                          std::to_string(TaskSuite::eval_block_size) + "]");
    }
    NoGradGuard guard;
    bool use_gen = generator_enabled(opt.setting, opt.ablation);
    bool use_fus = fusion_enabled(opt.setting, opt.ablation);
    EvalSummary summary;
    for (const auto& task : suite.tasks()) {
        if (task.held_out && !opt.include_held_out) continue;
        if (!task.held_out && !opt.include_train) continue;

        PromptFormat fmt;
        switch (opt.setting) {
            case RunSetting::hint:
                fmt = opt.shots > 0 ? PromptFormat::def_plus_pos : PromptFormat::def_only;
                break;
            case RunSetting::concat_baseline:
                fmt = PromptFormat::concat_baseline;
                break;
            default:
                fmt = PromptFormat::no_instruct;
                break;
        }
        std::span<const ExamplePair> pool(task.few_shot_pool.data(),
                                          task.few_shot_pool.size());
        int shots = opt.setting == RunSetting::no_instruct ? 0 : opt.shots;
        if (shots > static_cast<int>(pool.size())) {
            throw DataError("evaluate: not enough few-shot examples for '" +
                            task.task_id + "'");
        }
        std::span<const ExamplePair> chosen = pool.subspan(0, static_cast<std::size_t>(shots));

        // Instruction context once per task (the point of the architecture).
        TaskContext ctx;
        bool have_ctx = false;
        if (use_gen || use_fus) {
            FormattedExample probe =
                format_example(task, suite.eval_instance(task, 0), fmt, shots, chosen);
            ctx = provider ? provider(task, probe.hyper_tokens)
                           : hyper.build_task_context(task.task_id, probe.hyper_tokens);
            have_ctx = true;
            if (use_gen && !ctx.has_peft) {
                throw ContractError("evaluate: generator requested but context has no modules");
            }
            if (!use_gen) {
                ctx.peft = PeftSet{};
                ctx.has_peft = false;
            }
        }

        TaskEvalResult res;
        res.task_id = task.task_id;
        res.held_out = task.held_out;
        res.instances = opt.instances;
        for (int i = 0; i < opt.instances; ++i) {
            ExamplePair inst = suite.eval_instance(task, i);
            FormattedExample fe = format_example(task, inst, fmt, shots, chosen);
            std::string pred = predict_with_context(model, have_ctx ? &ctx : nullptr,
                                                    fe.model_tokens, use_fus,
                                                    opt.max_decode_len);
            res.exact_match += exact_match(pred, inst.output);
            res.token_f1 += token_f1(pred, inst.output);
        }
        res.exact_match /= opt.instances;
        res.token_f1 /= opt.instances;
        summary.per_task.push_back(res);
    }
    return summary;
}

} // namespace hint
