#include "hint/hypernet.hpp"
#include "hint/ops.hpp"
#include "hint/rng.hpp"
#include "hint/tasks.hpp"
#include "hint/tensor.hpp"
#include "hint/training.hpp"
#include "hint/transformer.hpp"

#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

namespace {

using namespace hint;

// One shared desk-scale model per process; benchmarks time steady-state work,
// not initialization.
struct Fixture {
    ModelConfig mc;
    std::unique_ptr<TransformerModel> model;
    Hypernetwork hyper;
    TaskSuite suite = TaskSuite::make(1);

    Fixture() {
        Rng rng(7);
        model = std::make_unique<TransformerModel>(TransformerModel::init(mc, rng));
        hyper = Hypernetwork::init(model.get(), rng, true);
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

void BM_Matmul(benchmark::State& state) {
    NoGradGuard guard;
    Rng rng(3);
    int n = static_cast<int>(state.range(0));
    Tensor a = Tensor::randn({n, n}, rng, 1.0);
    Tensor b = Tensor::randn({n, n}, rng, 1.0);
    for (auto _ : state) {
        Tensor c = matmul(a, b);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n) * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128);

void BM_EncoderForward(benchmark::State& state) {
    auto& f = fixture();
    NoGradGuard guard;
    std::vector<int> tokens(static_cast<std::size_t>(state.range(0)), int('a'));
    for (auto _ : state) {
        EncoderOutput out = f.model->encode(tokens, nullptr);
        benchmark::DoNotOptimize(out.states.data());
    }
}
BENCHMARK(BM_EncoderForward)->Arg(44)->Arg(133)->Unit(benchmark::kMillisecond);

void BM_GeneratePeft(benchmark::State& state) {
    auto& f = fixture();
    NoGradGuard guard;
    std::vector<int> tokens(69, int('a'));
    for (auto _ : state) {
        TaskContext ctx = f.hyper.build_task_context("bench", tokens);
        benchmark::DoNotOptimize(ctx.has_peft);
    }
}
BENCHMARK(BM_GeneratePeft)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    ModelConfig mc;
    TrainConfig tc;
    tc.steps = 1;
    tc.batch_size = static_cast<int>(state.range(0));
    Trainer trainer(mc, tc);
    Batch batch = trainer.sample_finetune_batch(fixture().suite);
    for (auto _ : state) {
        StepResult r = trainer.train_step(batch);
        benchmark::DoNotOptimize(r.loss);
    }
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
