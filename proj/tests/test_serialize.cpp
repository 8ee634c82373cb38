#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hint/checkpoint.hpp"
#include "hint/errors.hpp"
#include "hint/rng.hpp"
#include "hint/serialize.hpp"
#include "hint/task_cache.hpp"
#include "hint/tokenizer.hpp"
#include "hint/training.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace hint;
namespace fs = std::filesystem;

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
    return mc;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("hint_serialize_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int counter;
};
int TempDir::counter = 0;

bool bit_equal(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) {
            if (a.at({i, j}) != b.at({i, j})) return false;
        }
    }
    return true;
}

NamedArrayFile sample_file(Rng& rng) {
    NamedArrayFile f;
    f.kind = "test_arrays";
    f.meta_json = "{\"note\":\"sample\"}";
    f.arrays.emplace_back("alpha", Tensor::randn({3, 4}, rng, 1.0));
    f.arrays.emplace_back("beta", Tensor::from_data({1, 2}, {-0.0, 1.5e-300}));
    f.arrays.emplace_back("gamma", Tensor::zeros({2, 2}));
    return f;
}

void corrupt_byte(const std::string& path, std::int64_t offset_from_end) {
    std::fstream fio(path, std::ios::in | std::ios::out | std::ios::binary);
    fio.seekg(0, std::ios::end);
    std::int64_t size = fio.tellg();
    fio.seekp(size + offset_from_end, std::ios::beg);
    char c;
    fio.seekg(size + offset_from_end, std::ios::beg);
    fio.read(&c, 1);
    c = static_cast<char>(c ^ 0x5a);
    fio.seekp(size + offset_from_end, std::ios::beg);
    fio.write(&c, 1);
}

void truncate_to(const std::string& path, std::uintmax_t bytes) {
    fs::resize_file(path, bytes);
}

} // namespace

TEST_CASE("array files round trip bit-exactly") {
    TempDir tmp;
    Rng rng(1);
    NamedArrayFile f = sample_file(rng);
    std::string path = tmp.file("arrays.bin");
    write_array_file(path, f);
    NamedArrayFile g = read_array_file(path);
    CHECK(g.kind == f.kind);
    CHECK(g.meta_json == f.meta_json);
    REQUIRE(g.arrays.size() == f.arrays.size());
    for (std::size_t i = 0; i < f.arrays.size(); ++i) {
        CHECK(g.arrays[i].first == f.arrays[i].first);
        CHECK(bit_equal(g.arrays[i].second, f.arrays[i].second));
    }
    // loaded arrays are plain data, not graph leaves
    CHECK_FALSE(g.arrays[0].second.requires_grad());
}

TEST_CASE("fingerprint tracks content, not metadata") {
    Rng rng(2);
    NamedArrayFile f = sample_file(rng);
    std::uint64_t fp = array_file_fingerprint(f);

    NamedArrayFile meta = f;
    meta.meta_json = "{\"note\":\"different\"}";
    CHECK(array_file_fingerprint(meta) == fp);

    NamedArrayFile renamed = f;
    renamed.arrays[0].first = "alpha2";
    CHECK(array_file_fingerprint(renamed) != fp);

    NamedArrayFile rekinded = f;
    rekinded.kind = "other";
    CHECK(array_file_fingerprint(rekinded) != fp);

    NamedArrayFile tweaked = f;
    tweaked.arrays[0].second = f.arrays[0].second.detach();
    tweaked.arrays[0].second.data()[0] += 1e-12;
    CHECK(array_file_fingerprint(tweaked) != fp);
}

TEST_CASE("read errors name the failure") {
    TempDir tmp;
    CHECK_THROWS_AS(read_array_file(tmp.file("missing.bin")), DataError);

    Rng rng(3);
    NamedArrayFile f = sample_file(rng);

    std::string bad_magic = tmp.file("magic.bin");
    write_array_file(bad_magic, f);
    corrupt_byte(bad_magic, -static_cast<std::int64_t>(fs::file_size(bad_magic)));
    CHECK_THROWS_WITH_AS(read_array_file(bad_magic),
                         doctest::Contains("magic"), DataError);

    std::string bad_version = tmp.file("version.bin");
    write_array_file(bad_version, f);
    corrupt_byte(bad_version, -static_cast<std::int64_t>(fs::file_size(bad_version)) + 4);
    CHECK_THROWS_WITH_AS(read_array_file(bad_version),
                         doctest::Contains("version"), DataError);

    std::string truncated = tmp.file("truncated.bin");
    write_array_file(truncated, f);
    truncate_to(truncated, fs::file_size(truncated) - 9);
    CHECK_THROWS_AS(read_array_file(truncated), DataError);

    std::string header_only = tmp.file("header.bin");
    write_array_file(header_only, f);
    truncate_to(header_only, 6);
    CHECK_THROWS_AS(read_array_file(header_only), DataError);

    std::string trailing = tmp.file("trailing.bin");
    write_array_file(trailing, f);
    {
        std::ofstream app(trailing, std::ios::app | std::ios::binary);
        app << "junk";
    }
    CHECK_THROWS_AS(read_array_file(trailing), DataError);
}

TEST_CASE("checkpoints round trip through disk") {
    TempDir tmp;
    ModelConfig mc = desk_model();
    TrainConfig tc;
    tc.steps = 2;
    tc.seed = 21;
    Trainer trainer(mc, tc);
    TaskSuite suite = TaskSuite::make(tc.seed);
    trainer.train_step(trainer.sample_finetune_batch(suite));

    std::string path = tmp.file("checkpoint.bin");
    std::string fp_before = checkpoint_fingerprint(trainer.model(), trainer.hypernet());
    save_checkpoint(path, trainer.model(), trainer.hypernet(),
                    train_config_to_json(tc), "cafe0123", trainer.steps_taken());

    CheckpointData ck = load_checkpoint_data(path);
    CHECK(ck.model_config == mc);
    CHECK(ck.has_generator);
    CHECK(ck.steps_taken == 1);
    CHECK(ck.manifest_hash == "cafe0123");
    CHECK(ck.fingerprint == fp_before);
    TrainConfig tc2 = train_config_from_json(ck.train_config_json);
    CHECK(tc2.seed == tc.seed);

    // applying the arrays reproduces the exact weights
    Rng rng(99);
    TransformerModel fresh = TransformerModel::init(mc, rng);
    Hypernetwork fresh_hyper = Hypernetwork::init(&fresh, rng, true);
    apply_checkpoint_arrays(ck, fresh, fresh_hyper);
    CHECK(checkpoint_fingerprint(fresh, fresh_hyper) == fp_before);
    CHECK(bit_equal(fresh.out_proj, trainer.model().out_proj));
}

TEST_CASE("corrupt checkpoints fail the fingerprint check") {
    TempDir tmp;
    ModelConfig mc = desk_model();
    TrainConfig tc;
    tc.seed = 5;
    Trainer trainer(mc, tc);
    std::string path = tmp.file("checkpoint.bin");
    save_checkpoint(path, trainer.model(), trainer.hypernet(),
                    train_config_to_json(tc), "00", 0);
    corrupt_byte(path, -3); // inside the last array's raw data
    CHECK_THROWS_WITH_AS(load_checkpoint_data(path),
                         doctest::Contains("fingerprint"), DataError);
}

TEST_CASE("apply rejects checkpoints for another architecture") {
    TempDir tmp;
    ModelConfig mc = desk_model();
    TrainConfig tc;
    tc.seed = 6;
    Trainer trainer(mc, tc);
    std::string path = tmp.file("checkpoint.bin");
    save_checkpoint(path, trainer.model(), trainer.hypernet(),
                    train_config_to_json(tc), "00", 0);
    CheckpointData ck = load_checkpoint_data(path);

    ModelConfig wider = mc;
    wider.d_model = 32;
    wider.embed_dim = 32;
    wider.head_dim = 16;
    Rng rng(1);
    TransformerModel other = TransformerModel::init(wider, rng);
    Hypernetwork other_hyper = Hypernetwork::init(&other, rng, true);
    CHECK_THROWS_AS(apply_checkpoint_arrays(ck, other, other_hyper), DataError);
}

TEST_CASE("zero-step checkpoint equals a fresh trainer's init state") {
    TempDir tmp;
    ModelConfig mc = desk_model();
    TrainConfig tc;
    tc.seed = 7;
    Trainer a(mc, tc);
    std::string path = tmp.file("init.bin");
    save_checkpoint(path, a.model(), a.hypernet(), train_config_to_json(tc), "00", 0);
    CheckpointData ck = load_checkpoint_data(path);
    Trainer b(mc, tc); // same seed, fresh init
    CHECK(ck.fingerprint == checkpoint_fingerprint(b.model(), b.hypernet()));
}

TEST_CASE("task cache round trips contexts keyed by checkpoint fingerprint") {
    TempDir tmp;
    ModelConfig mc = desk_model();
    Rng rng(8);
    TransformerModel model = TransformerModel::init(mc, rng);
    Hypernetwork hyper = Hypernetwork::init(&model, rng, true);
    std::string fp = checkpoint_fingerprint(model, hyper);

    NoGradGuard ng;
    ByteTokenizer tok;
    std::vector<int> instr = tok.encode("reverse the text.");
    instr.push_back(ByteTokenizer::eos_id);
    TaskContext ctx = hyper.build_task_context("reverse", instr);

    TaskCache cache(tmp.file("cache"));
    CHECK_FALSE(cache.contains("reverse"));
    std::string path = cache.put(ctx, mc, fp);
    CHECK(fs::exists(path));
    CHECK(cache.contains("reverse"));

    TaskContext back = cache.get("reverse", mc, fp);
    CHECK(back.task_id == "reverse");
    CHECK(back.instruction_tokens == instr);
    CHECK(back.has_peft);
    CHECK(bit_equal(back.encoded_instruction.states, ctx.encoded_instruction.states));
    auto a = ctx.peft.named_arrays();
    auto b = back.peft.named_arrays();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].first == b[i].first);
        CHECK(bit_equal(a[i].second, b[i].second));
    }
    CHECK_NOTHROW(back.peft.validate(mc));
}

TEST_CASE("task cache rejects stale and mismatched entries") {
    TempDir tmp;
    ModelConfig mc = desk_model();
    Rng rng(9);
    TransformerModel model = TransformerModel::init(mc, rng);
    Hypernetwork hyper = Hypernetwork::init(&model, rng, true);
    std::string fp = checkpoint_fingerprint(model, hyper);

    NoGradGuard ng;
    TaskContext ctx = hyper.build_task_context("reverse", std::vector<int>{1, 2, 3});
    TaskCache cache(tmp.file("cache"));
    cache.put(ctx, mc, fp);

    CHECK_THROWS_WITH_AS(cache.get("reverse", mc, "deadbeef"),
                         doctest::Contains("warm"), DataError); // points at re-warming
    CHECK_THROWS_AS(cache.get("missing", mc, fp), DataError);

    ModelConfig other = mc;
    other.prefix_length = 3;
    CHECK_THROWS_AS(cache.get("reverse", other, fp), DataError);
}

TEST_CASE("task cache lists and evicts entries") {
    TempDir tmp;
    ModelConfig mc = desk_model();
    Rng rng(10);
    TransformerModel model = TransformerModel::init(mc, rng);
    Hypernetwork hyper = Hypernetwork::init(&model, rng, true);
    std::string fp = checkpoint_fingerprint(model, hyper);

    NoGradGuard ng;
    TaskCache cache(tmp.file("cache"));
    cache.put(hyper.build_task_context("reverse", std::vector<int>{1, 2}), mc, fp);
    cache.put(hyper.build_task_context("caesar1", std::vector<int>{3, 4}), mc, fp);

    std::vector<TaskCache::Entry> entries = cache.list();
    REQUIRE(entries.size() == 2);
    for (const auto& e : entries) {
        CHECK((e.task_id == "reverse" || e.task_id == "caesar1"));
        CHECK(e.checkpoint_fingerprint == fp);
        CHECK(e.bytes > 0);
        CHECK(fs::exists(e.path));
    }

    CHECK(cache.evict("reverse"));
    CHECK_FALSE(cache.contains("reverse"));
    CHECK_FALSE(cache.evict("reverse")); // second evict is a no-op
    CHECK(cache.list().size() == 1);
}

TEST_CASE("task cache refuses path-hostile task ids") {
    TempDir tmp;
    TaskCache cache(tmp.file("cache"));
    ModelConfig mc = desk_model();
    NoGradGuard ng;
    TaskContext ctx;
    ctx.task_id = "../escape";
    ctx.instruction_tokens = {1};
    ctx.encoded_instruction.states = Tensor::zeros({1, 16});
    CHECK_THROWS_AS(cache.put(ctx, mc, "00"), DataError);
}
