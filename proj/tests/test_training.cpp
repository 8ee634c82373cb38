#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hint/errors.hpp"
#include "hint/ops.hpp"
#include "hint/tokenizer.hpp"
#include "hint/training.hpp"

#include <cmath>
#include <set>
#include <vector>

using namespace hint;

namespace {

ModelConfig desk_model() {
    ModelConfig mc;
    mc.layers = 2;
    mc.d_model = 16;
    mc.heads = 2;
    mc.head_dim = 8;
    mc.ffn_dim = 32;
    mc.embed_dim = 16;
    mc.max_seq_len = 96;
    mc.adapter_bottleneck = 4;
    mc.prefix_length = 2;
    mc.lora_rank = 2;
    mc.kinds = {true, true, true};
    mc.validate();
    return mc;
}

TrainConfig desk_train(RunSetting setting = RunSetting::hint) {
    TrainConfig tc;
    tc.mode = TrainMode::finetune;
    tc.setting = setting;
    tc.steps = 3;
    tc.batch_size = 4;
    tc.learning_rate = 1e-3;
    tc.seed = 11;
    tc.pretrain_seq_len = 24;
    return tc;
}

// feeds the optimizer a chosen gradient: d/dp sum(p * g) = g
void push_grad(AdamOptimizer& opt, std::vector<Tensor>& params,
               const std::vector<double>& grads) {
    opt.zero_grad();
    Tensor total;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor term = sum_all(scale(params[i], grads[i]));
        total = total.defined() ? add(total, term) : term;
    }
    backward(total);
}

} // namespace

TEST_CASE("adam first steps move weights by the learning rate") {
    Tensor w = Tensor::from_data({1, 1}, {0.5}, true);
    std::vector<Tensor> params = {w};
    AdamOptimizer opt(params, 0.1, 0.0); // clip disabled
    for (int expected_steps = 1; expected_steps <= 3; ++expected_steps) {
        push_grad(opt, params, {1.0});
        double norm = opt.step();
        CHECK(norm == doctest::Approx(1.0));
        CHECK(opt.steps_taken() == expected_steps);
    }
    // constant unit gradient: every bias-corrected update is lr/(1 + eps)
    CHECK(w.item() == doctest::Approx(0.2).epsilon(1e-6));
}

TEST_CASE("adam matches a hand-rolled reference when clipping engages") {
    Tensor a = Tensor::from_data({1, 1}, {1.0}, true);
    Tensor b = Tensor::from_data({1, 1}, {-2.0}, true);
    std::vector<Tensor> params = {a, b};
    double lr = 0.05, clip = 1.0;
    AdamOptimizer opt(params, lr, clip);

    // step 1 norm is 5 (clipped to 1), step 2 norm is 0.1 (not clipped)
    std::vector<std::vector<double>> grad_seq = {{3.0, 4.0}, {0.06, 0.08}};
    double wa = 1.0, wb = -2.0;
    double ma = 0, mb = 0, va = 0, vb = 0;
    int t = 0;
    for (const auto& g : grad_seq) {
        push_grad(opt, params, g);
        double norm = opt.step();
        double expected_norm = std::sqrt(g[0] * g[0] + g[1] * g[1]);
        CHECK(norm == doctest::Approx(expected_norm));

        double factor = expected_norm > clip ? clip / expected_norm : 1.0;
        ++t;
        double bc1 = 1.0 - std::pow(AdamOptimizer::beta1, t);
        double bc2 = 1.0 - std::pow(AdamOptimizer::beta2, t);
        auto ref = [&](double& w, double& m, double& v, double gi) {
            gi *= factor;
            m = AdamOptimizer::beta1 * m + (1.0 - AdamOptimizer::beta1) * gi;
            v = AdamOptimizer::beta2 * v + (1.0 - AdamOptimizer::beta2) * gi * gi;
            w -= lr * (m / bc1) / (std::sqrt(v / bc2) + AdamOptimizer::eps);
        };
        ref(wa, ma, va, g[0]);
        ref(wb, mb, vb, g[1]);
        CHECK(a.item() == doctest::Approx(wa).epsilon(1e-12));
        CHECK(b.item() == doctest::Approx(wb).epsilon(1e-12));
    }
}

TEST_CASE("parameters without gradients stay put") {
    Tensor used = Tensor::from_data({1, 1}, {1.0}, true);
    Tensor unused = Tensor::from_data({1, 1}, {7.0}, true);
    std::vector<Tensor> params = {used, unused};
    AdamOptimizer opt(params, 0.1, 1.0);
    push_grad(opt, params, {1.0, 0.0}); // scale by 0 still builds a graph node
    opt.zero_grad();
    backward(sum_all(used)); // only `used` appears in this loss
    opt.step();
    CHECK(unused.item() == 7.0);
    CHECK(used.item() < 1.0);
    CHECK_THROWS_AS(AdamOptimizer({Tensor()}, 0.1, 1.0), ContractError);
}

TEST_CASE("every parameter tensor moves under hint training") {
    ModelConfig mc = desk_model();
    TrainConfig tc = desk_train();
    Trainer trainer(mc, tc);
    TaskSuite suite = TaskSuite::make(tc.seed);

    auto snapshot = [&]() {
        std::vector<std::vector<double>> snap;
        for (const auto& [n, t] : trainer.model().named_parameters()) {
            snap.emplace_back(t.data(), t.data() + t.size());
        }
        for (const auto& [n, t] : trainer.hypernet().named_parameters()) {
            snap.emplace_back(t.data(), t.data() + t.size());
        }
        return snap;
    };
    auto before = snapshot();
    for (int s = 0; s < 10; ++s) {
        trainer.train_step(trainer.sample_finetune_batch(suite));
    }
    auto after = snapshot();
    REQUIRE(before.size() == after.size());

    std::vector<std::string> names;
    for (const auto& [n, t] : trainer.model().named_parameters()) names.push_back(n);
    for (const auto& [n, t] : trainer.hypernet().named_parameters()) names.push_back(n);
    for (std::size_t i = 0; i < before.size(); ++i) {
        bool moved = before[i] != after[i];
        INFO("parameter tensor ", names[i]);
        CHECK(moved); // a frozen tensor means a dead gradient path
    }
}

TEST_CASE("batch loss is the mean of per-item losses") {
    ModelConfig mc = desk_model();
    TrainConfig tc = desk_train();
    Trainer t1(mc, tc);
    Trainer t2(mc, tc); // same seed: identical weights
    TaskSuite suite = TaskSuite::make(tc.seed);

    Batch mixed = t1.sample_finetune_batch(suite);
    std::set<std::string> ids;
    for (const auto& item : mixed.items) ids.insert(item.task_id);
    CHECK(ids.size() >= 2); // seed chosen so the batch really mixes tasks

    double batch_loss = t1.train_step(mixed).loss;
    NoGradGuard ng;
    double sum = 0.0;
    for (const auto& item : mixed.items) {
        sum += item_loss(t2.model(), t2.hypernet(), item, true, true).item();
    }
    CHECK(batch_loss ==
          doctest::Approx(sum / static_cast<double>(mixed.items.size())).epsilon(1e-9));
}

TEST_CASE("uniform logits give ln(vocab) loss") {
    ModelConfig mc = desk_model();
    TrainConfig tc = desk_train();
    Trainer trainer(mc, tc);
    TaskSuite suite = TaskSuite::make(3);
    Batch batch = trainer.sample_finetune_batch(suite);

    Tensor& out_proj = trainer.model().out_proj;
    for (std::size_t i = 0; i < out_proj.size(); ++i) out_proj.data()[i] = 0.0;
    NoGradGuard ng;
    Tensor l = item_loss(trainer.model(), trainer.hypernet(), batch.items[0], true, true);
    CHECK(l.item() == doctest::Approx(std::log(260.0)).epsilon(1e-12));
}

TEST_CASE("item loss validates its inputs") {
    ModelConfig mc = desk_model();
    TrainConfig tc = desk_train();
    Trainer trainer(mc, tc);
    NoGradGuard ng;
    BatchItem no_target{{1, 2}, {3, 4}, {}, "t"};
    CHECK_THROWS_AS(item_loss(trainer.model(), trainer.hypernet(), no_target, true, true),
                    DataError);
    BatchItem no_instr{{}, {3, 4}, {5}, "t"};
    CHECK_THROWS_AS(item_loss(trainer.model(), trainer.hypernet(), no_instr, true, true),
                    DataError);
    CHECK_NOTHROW(item_loss(trainer.model(), trainer.hypernet(), no_instr, false, false));
}

TEST_CASE("same seed, same trajectory") {
    ModelConfig mc = desk_model();
    TrainConfig tc = desk_train();
    Trainer t1(mc, tc);
    Trainer t2(mc, tc);
    TaskSuite suite = TaskSuite::make(tc.seed);
    for (int s = 0; s < 3; ++s) {
        StepResult r1 = t1.train_step(t1.sample_finetune_batch(suite));
        StepResult r2 = t2.train_step(t2.sample_finetune_batch(suite));
        CHECK(r1.loss == r2.loss); // bit-exact, same op order
        CHECK(r1.grad_norm == r2.grad_norm);
    }
    CHECK(t1.steps_taken() == 3);
}

TEST_CASE("training diverges loudly under an absurd learning rate") {
    ModelConfig mc = desk_model();
    TrainConfig tc = desk_train();
    tc.learning_rate = 1e6;
    tc.grad_clip = 1e9;
    Trainer trainer(mc, tc);
    TaskSuite suite = TaskSuite::make(tc.seed);
    bool threw = false;
    try {
        for (int s = 0; s < 6; ++s) {
            trainer.train_step(trainer.sample_finetune_batch(suite));
        }
    } catch (const DivergenceError&) {
        threw = true;
    }
    CHECK(threw);
}

TEST_CASE("pretrain batches carry chunked text in all three slots") {
    ModelConfig mc = desk_model();
    TrainConfig tc = desk_train();
    tc.mode = TrainMode::pretrain;
    Trainer trainer(mc, tc);
    std::vector<int> corpus;
    for (int i = 0; i < 400; ++i) corpus.push_back('a' + (i % 26));
    CorpusStream stream(corpus, tc.pretrain_seq_len);

    Batch batch = trainer.sample_pretrain_batch(stream);
    REQUIRE(batch.items.size() == static_cast<std::size_t>(tc.batch_size));
    for (const auto& item : batch.items) {
        CHECK(item.hyper_tokens.size() >= 2);
        CHECK(item.model_tokens.size() >= 2);
        CHECK(item.target_tokens.size() >= 2);
        CHECK(item.hyper_tokens.back() == ByteTokenizer::eos_id);
        CHECK(item.model_tokens.back() == ByteTokenizer::eos_id);
        CHECK(item.target_tokens.back() == ByteTokenizer::eos_id);
        // a + b + c reassemble one stream window
        CHECK(item.hyper_tokens.size() + item.model_tokens.size() +
                  item.target_tokens.size() ==
              static_cast<std::size_t>(tc.pretrain_seq_len) + 3);
    }
}

TEST_CASE("pretraining requires the hint setting") {
    ModelConfig mc = desk_model();
    TrainConfig tc = desk_train(RunSetting::no_instruct);
    tc.mode = TrainMode::pretrain;
    Trainer trainer(mc, tc);
    std::vector<int> corpus(200, 'x');
    CorpusStream stream(corpus, tc.pretrain_seq_len);
    CHECK_THROWS_AS(trainer.sample_pretrain_batch(stream), ConfigError);
}

TEST_CASE("run modes are enforced") {
    ModelConfig mc = desk_model();
    TrainConfig tc = desk_train();
    Trainer trainer(mc, tc); // finetune mode
    std::vector<int> corpus(200, 'x');
    CorpusStream stream(corpus, tc.pretrain_seq_len);
    CHECK_THROWS_AS(trainer.run_pretrain(stream), ConfigError);

    tc.mode = TrainMode::pretrain;
    Trainer pre(mc, tc);
    TaskSuite suite = TaskSuite::make(1);
    CHECK_THROWS_AS(pre.run_finetune(suite), ConfigError);
}

TEST_CASE("finetune batches draw training tasks only and honor the mix") {
    ModelConfig mc = desk_model();
    TrainConfig tc = desk_train();
    tc.batch_size = 16;
    TaskSuite suite = TaskSuite::make(5);
    std::set<std::string> train_ids;
    for (const auto& id : suite.train_ids()) train_ids.insert(id);

    tc.fewshot_mix = 0.0;
    Trainer never(mc, tc);
    Batch b0 = never.sample_finetune_batch(suite);
    for (const auto& item : b0.items) {
        CHECK(train_ids.count(item.task_id) == 1);
        // def_only: instruction + eos only
        const SyntheticTask& task = suite.task(item.task_id);
        CHECK(item.hyper_tokens.size() == task.instruction.size() + 1);
    }

    tc.fewshot_mix = 1.0;
    Trainer always(mc, tc);
    Batch b1 = always.sample_finetune_batch(suite);
    for (const auto& item : b1.items) {
        const SyntheticTask& task = suite.task(item.task_id);
        CHECK(item.hyper_tokens.size() > task.instruction.size() + 1);
    }
}

TEST_CASE("trainer resumes bit-exactly from a fresh checkpoint struct") {
    ModelConfig mc = desk_model();
    TrainConfig tc = desk_train();
    Trainer trainer(mc, tc);
    TaskSuite suite = TaskSuite::make(tc.seed);
    trainer.train_step(trainer.sample_finetune_batch(suite));

    CheckpointData ck;
    ck.model_config = mc;
    ck.has_generator = true;
    ck.steps_taken = 1;
    for (const auto& [n, t] : trainer.model().named_parameters()) {
        ck.arrays.emplace_back("model." + n, t);
    }
    for (const auto& [n, t] : trainer.hypernet().named_parameters()) {
        ck.arrays.emplace_back("hypernet." + n, t);
    }
    Trainer resumed(ck, tc);
    StepResult a = resumed.train_step(resumed.sample_finetune_batch(suite));
    CHECK(std::isfinite(a.loss));

    TrainConfig bad = tc;
    bad.ablation = Ablation::adapters_only; // generator bank covers all kinds
    CHECK_THROWS_AS(Trainer(ck, bad), ConfigError);

    CheckpointData no_gen = ck;
    no_gen.has_generator = false;
    CHECK_THROWS_AS(Trainer(no_gen, tc), ConfigError);
}

TEST_CASE("evaluate produces one row per task and respects split filters") {
    ModelConfig mc = desk_model();
    TrainConfig tc = desk_train();
    Trainer trainer(mc, tc);
    TaskSuite suite = TaskSuite::make(2);

    EvalOptions opt;
    opt.instances = 3;
    opt.max_decode_len = 6;
    EvalSummary all = evaluate(trainer.model(), trainer.hypernet(), suite, opt);
    CHECK(all.per_task.size() == 12);

    opt.include_held_out = false;
    CHECK(evaluate(trainer.model(), trainer.hypernet(), suite, opt).per_task.size() == 9);
    opt.include_held_out = true;
    opt.include_train = false;
    CHECK(evaluate(trainer.model(), trainer.hypernet(), suite, opt).per_task.size() == 3);

    opt.include_train = true;
    opt.instances = 0;
    CHECK_THROWS_AS(evaluate(trainer.model(), trainer.hypernet(), suite, opt), ConfigError);
    opt.instances = TaskSuite::eval_block_size + 1;
    CHECK_THROWS_AS(evaluate(trainer.model(), trainer.hypernet(), suite, opt), ConfigError);
}

TEST_CASE("a context provider is called once per task and changes nothing") {
    ModelConfig mc = desk_model();
    TrainConfig tc = desk_train();
    Trainer trainer(mc, tc);
    TaskSuite suite = TaskSuite::make(4);

    EvalOptions opt;
    opt.instances = 4;
    opt.max_decode_len = 6;
    EvalSummary plain = evaluate(trainer.model(), trainer.hypernet(), suite, opt);

    int calls = 0;
    ContextProvider provider = [&](const SyntheticTask& task,
                                   std::span<const int> instr) {
        ++calls;
        return trainer.hypernet().build_task_context(task.task_id, instr);
    };
    EvalSummary via = evaluate(trainer.model(), trainer.hypernet(), suite, opt, provider);
    CHECK(calls == 12);
    REQUIRE(via.per_task.size() == plain.per_task.size());
    for (std::size_t i = 0; i < via.per_task.size(); ++i) {
        CHECK(via.per_task[i].exact_match == plain.per_task[i].exact_match);
        CHECK(via.per_task[i].token_f1 == plain.per_task[i].token_f1);
    }
}

TEST_CASE("fusion needs a context to fuse") {
    ModelConfig mc = desk_model();
    TrainConfig tc = desk_train();
    Trainer trainer(mc, tc);
    std::vector<int> tokens = {1, 2, 3};
    CHECK_THROWS_AS(
        predict_with_context(trainer.model(), nullptr, tokens, true, 4),
        ContractError);
    CHECK_NOTHROW(predict_with_context(trainer.model(), nullptr, tokens, false, 4));
}
