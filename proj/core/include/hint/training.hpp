#pragma once

#include "hint/checkpoint.hpp"
#include "hint/config.hpp"
#include "hint/corpus.hpp"
#include "hint/hypernet.hpp"
#include "hint/rng.hpp"
#include "hint/tasks.hpp"
#include "hint/transformer.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hint {

// Adam with bias correction and global-norm gradient clipping. Parameters
// update in construction order; missing gradients count as zero.
class AdamOptimizer {
public:
    static constexpr double beta1 = 0.9;
    static constexpr double beta2 = 0.999;
    static constexpr double eps = 1e-8;

    AdamOptimizer(std::vector<Tensor> params, double learning_rate, double grad_clip);

    void zero_grad();
    double step(); // returns the pre-clip global gradient norm
    int steps_taken() const { return t_; }
    const std::vector<Tensor>& params() const { return params_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_;
    double clip_;
    int t_ = 0;
};

struct BatchItem {
    std::vector<int> hyper_tokens; // empty outside the hint setting
    std::vector<int> model_tokens;
    std::vector<int> target_tokens; // includes trailing eos
    std::string task_id;
};

struct Batch {
    std::vector<BatchItem> items;
};

// Forward pass for one example; returns the scalar mean cross-entropy over
// its target tokens. The graph spans hypernetwork, generated modules and the
// underlying model, so one backward reaches everything.
Tensor item_loss(const TransformerModel& model, const Hypernetwork& hyper,
                 const BatchItem& item, bool use_generator, bool use_fusion);

struct StepResult {
    double loss = 0.0;
    double grad_norm = 0.0;
};

struct TrainLogRow {
    int step = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
    double millis = 0.0;
};

struct TrainResult {
    std::vector<TrainLogRow> rows; // one per step
    double final_loss = 0.0;
};

// Owns model, hypernetwork and optimizer for one run. Not movable: the
// hypernetwork points at the member model.
class Trainer {
public:
    Trainer(const ModelConfig& mc, const TrainConfig& tc);
    Trainer(const CheckpointData& ck, const TrainConfig& tc);
    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    StepResult train_step(const Batch& batch);

    Batch sample_pretrain_batch(CorpusStream& stream);
    Batch sample_finetune_batch(const TaskSuite& suite);

    using LogCallback = std::function<void(const TrainLogRow&)>;
    TrainResult run_pretrain(CorpusStream& stream, const LogCallback& on_log = {});
    TrainResult run_finetune(const TaskSuite& suite, const LogCallback& on_log = {});

    TransformerModel& model() { return model_; }
    const TransformerModel& model() const { return model_; }
    Hypernetwork& hypernet() { return hyper_; }
    const Hypernetwork& hypernet() const { return hyper_; }
    const ModelConfig& model_config() const { return mc_; }
    const TrainConfig& train_config() const { return tc_; }
    AdamOptimizer& optimizer() { return *opt_; }
    int steps_taken() const { return step_; }

private:
    void build_optimizer();

    ModelConfig mc_;
    TrainConfig tc_;
    TransformerModel model_;
    Hypernetwork hyper_;
    std::unique_ptr<AdamOptimizer> opt_;
    Rng data_rng_;
    Rng chunk_rng_;
    int step_ = 0;
};

// ---------------------------------------------------------------------------
// Evaluation: greedy decoding scored with exact match and token F1. Task
// contexts are built once per task and reused across instances.

struct EvalOptions {
    RunSetting setting = RunSetting::hint;
    Ablation ablation = Ablation::none;
    int shots = 0;
    int instances = 20;
    int max_decode_len = 20;
    bool include_train = true;
    bool include_held_out = true;
};

// Optional hook so callers can serve task contexts from a disk cache instead
// of regenerating them; the default builds one fresh context per task.
using ContextProvider =
    std::function<TaskContext(const SyntheticTask&, std::span<const int>)>;

EvalSummary evaluate(const TransformerModel& model, const Hypernetwork& hyper,
                     const TaskSuite& suite, const EvalOptions& opt,
                     const ContextProvider& provider = {});

// Greedy prediction for already-encoded inputs. `ctx` may be null (no
// modules, no fusion source); with a context, fusion is optional.
std::string predict_with_context(const TransformerModel& model, const TaskContext* ctx,
                                 std::span<const int> model_tokens, bool use_fusion,
                                 int max_decode_len);

} // namespace hint
