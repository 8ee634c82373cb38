#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hint/errors.hpp"
#include "hint/rng.hpp"
#include "hint/tasks.hpp"
#include "hint/tokenizer.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <vector>

using namespace hint;

TEST_CASE("suite has twelve tasks split nine train, three held out") {
    TaskSuite suite = TaskSuite::make(42);
    CHECK(suite.tasks().size() == 12);
    std::vector<std::string> train = suite.train_ids();
    std::vector<std::string> held = suite.held_out_ids();
    CHECK(train.size() == 9);
    CHECK(held.size() == 3);
    std::set<std::string> held_set(held.begin(), held.end());
    CHECK(held_set == std::set<std::string>{"caesar2", "rotate3", "select1"});
    for (const auto& id : train) CHECK_FALSE(held_set.count(id));
    CHECK(suite.task("reverse").held_out == false);
    CHECK(suite.task("caesar2").held_out == true);
    CHECK_THROWS_AS(suite.task("caesar9"), DataError);
}

TEST_CASE("task transforms match hand-computed outputs") {
    TaskSuite suite = TaskSuite::make(0);
    auto f = [&](const std::string& id, const std::string& in) {
        return suite.task(id).apply(in);
    };
    CHECK(f("reverse", "abc") == "cba");
    CHECK(f("caesar1", "abz") == "bca");
    CHECK(f("caesar2", "yz") == "ab");
    CHECK(f("caesar3", "xyz") == "abc");
    CHECK(f("caesar4", "wxyz") == "abcd");
    CHECK(f("rotate1", "abcd") == "dabc");
    CHECK(f("rotate2", "abcd") == "cdab");
    CHECK(f("rotate3", "abcde") == "cdeab");
    CHECK(f("select1", "abc") == "a");
    CHECK(f("select2", "abc") == "b");
    CHECK(f("select3", "abcd") == "c");
    CHECK(f("repeat2", "ab") == "abab");
}

TEST_CASE("family instructions share a template and differ in the digit") {
    TaskSuite suite = TaskSuite::make(42);
    const std::string& c1 = suite.task("caesar1").instruction;
    const std::string& c2 = suite.task("caesar2").instruction;
    CHECK(c1 != c2);
    CHECK(c1.find("shift") != std::string::npos);
    CHECK(c2.find("shift") != std::string::npos);
    CHECK(c2.find('2') != std::string::npos);
    CHECK(suite.task("rotate3").instruction.find("rotate") != std::string::npos);
    CHECK(suite.task("select1").instruction.find('1') != std::string::npos);
}

TEST_CASE("eval instances are deterministic and self-consistent") {
    TaskSuite a = TaskSuite::make(7);
    TaskSuite b = TaskSuite::make(7);
    TaskSuite c = TaskSuite::make(8);
    bool any_differs = false;
    for (const auto& t : a.tasks()) {
        for (int i = 0; i < 10; ++i) {
            ExamplePair pa = a.eval_instance(t, i);
            ExamplePair pb = b.eval_instance(b.task(t.task_id), i);
            CHECK(pa.input == pb.input);
            CHECK(pa.output == pb.output);
            CHECK(pa.output == t.apply(pa.input));
            CHECK(a.is_eval_input(pa.input));
            if (pa.input != c.eval_instance(c.task(t.task_id), i).input) any_differs = true;
        }
    }
    CHECK(any_differs); // different seed, different blocks
    const auto& task0 = a.tasks()[0];
    CHECK_THROWS_AS(a.eval_instance(task0, -1), DataError);
    CHECK_THROWS_AS(a.eval_instance(task0, TaskSuite::eval_block_size), DataError);
}

TEST_CASE("training instances never collide with eval blocks") {
    TaskSuite suite = TaskSuite::make(3);
    Rng rng(99);
    for (const auto& t : suite.tasks()) {
        for (int i = 0; i < 50; ++i) {
            ExamplePair p = suite.sample_train_instance(t, rng);
            CHECK_FALSE(suite.is_eval_input(p.input));
            CHECK(p.output == t.apply(p.input));
        }
    }
}

TEST_CASE("few-shot pools are disjoint from eval blocks") {
    TaskSuite suite = TaskSuite::make(5);
    for (const auto& t : suite.tasks()) {
        CHECK(t.few_shot_pool.size() == 8);
        for (const auto& ex : t.few_shot_pool) {
            CHECK_FALSE(suite.is_eval_input(ex.input));
            CHECK(ex.output == t.apply(ex.input));
        }
    }
}

TEST_CASE("exact match and byte-level f1 match hand values") {
    CHECK(exact_match("abc", "abc") == 1.0);
    CHECK(exact_match("abc", "abd") == 0.0);
    CHECK(exact_match("", "") == 1.0);
    CHECK(token_f1("aab", "ab") == doctest::Approx(0.8));
    CHECK(token_f1("ab", "ba") == 1.0); // multiset ignores order
    CHECK(token_f1("abc", "abc") == 1.0);
    CHECK(token_f1("xyz", "abc") == 0.0);
    CHECK(token_f1("", "") == 1.0);
    CHECK(token_f1("a", "") == 0.0);
    CHECK(token_f1("", "a") == 0.0);
}

TEST_CASE("eval summary means filter by split") {
    EvalSummary s;
    s.per_task = {{"t1", false, 10, 1.0, 1.0},
                  {"t2", false, 10, 0.5, 0.6},
                  {"h1", true, 10, 0.2, 0.3}};
    CHECK(s.mean_exact_match(false) == doctest::Approx(0.75));
    CHECK(s.mean_token_f1(false) == doctest::Approx(0.8));
    CHECK(s.mean_exact_match(true) == doctest::Approx(0.2));
    EvalSummary empty;
    CHECK(empty.mean_exact_match(true) == 0.0);
}

TEST_CASE("format lengths follow the token arithmetic") {
    TaskSuite suite = TaskSuite::make(19);
    const SyntheticTask& task = suite.task("reverse");
    ExamplePair inst = suite.eval_instance(task, 0);
    std::span<const ExamplePair> pool(task.few_shot_pool);
    auto ilen = static_cast<int>(task.instruction.size());
    auto xlen = static_cast<int>(inst.input.size());

    FormattedExample d0 = format_example(task, inst, PromptFormat::def_only, 0, pool);
    CHECK(static_cast<int>(d0.hyper_tokens.size()) == ilen + 1);
    CHECK(d0.hyper_tokens.back() == ByteTokenizer::eos_id);
    CHECK(static_cast<int>(d0.model_tokens.size()) == xlen + 1);
    CHECK(d0.model_tokens.back() == ByteTokenizer::eos_id);
    CHECK(static_cast<int>(d0.target_tokens.size()) ==
          static_cast<int>(inst.output.size()) + 1);
    CHECK(d0.target_tokens.back() == ByteTokenizer::eos_id);
    CHECK(d0.task_id == "reverse");

    for (int shots : {1, 2, 3}) {
        int shot_len = 0;
        for (int s = 0; s < shots; ++s) {
            shot_len += 2 + static_cast<int>(pool[s].input.size() + pool[s].output.size());
        }
        FormattedExample dp =
            format_example(task, inst, PromptFormat::def_plus_pos, shots, pool);
        CHECK(static_cast<int>(dp.hyper_tokens.size()) == ilen + shot_len + 1);
        CHECK(dp.model_tokens == d0.model_tokens); // shots ride the instruction only

        FormattedExample cc =
            format_example(task, inst, PromptFormat::concat_baseline, shots, pool);
        CHECK(cc.hyper_tokens.empty());
        CHECK(static_cast<int>(cc.model_tokens.size()) == ilen + shot_len + 1 + xlen + 1);
    }

    FormattedExample ni = format_example(task, inst, PromptFormat::no_instruct, 0, pool);
    CHECK(ni.hyper_tokens.empty());
    CHECK(static_cast<int>(ni.model_tokens.size()) == xlen + 1);
}

TEST_CASE("zero-shot def_plus_pos equals def_only") {
    TaskSuite suite = TaskSuite::make(19);
    const SyntheticTask& task = suite.task("caesar3");
    ExamplePair inst = suite.eval_instance(task, 4);
    std::span<const ExamplePair> pool(task.few_shot_pool);
    FormattedExample a = format_example(task, inst, PromptFormat::def_only, 0, pool);
    FormattedExample b = format_example(task, inst, PromptFormat::def_plus_pos, 0, pool);
    CHECK(a.hyper_tokens == b.hyper_tokens);
    CHECK(a.model_tokens == b.model_tokens);
    CHECK(a.target_tokens == b.target_tokens);
}

TEST_CASE("format rejects bad shot counts") {
    TaskSuite suite = TaskSuite::make(19);
    const SyntheticTask& task = suite.task("reverse");
    ExamplePair inst = suite.eval_instance(task, 0);
    std::span<const ExamplePair> pool(task.few_shot_pool);
    CHECK_THROWS_AS(format_example(task, inst, PromptFormat::def_plus_pos, -1, pool),
                    ContractError);
    CHECK_THROWS_AS(format_example(task, inst, PromptFormat::concat_baseline, 9, pool),
                    DataError);
    // def_only ignores the pool entirely
    CHECK_NOTHROW(format_example(task, inst, PromptFormat::def_only, 0, {}));
}

TEST_CASE("format round trips through the tokenizer") {
    TaskSuite suite = TaskSuite::make(19);
    ByteTokenizer tok;
    const SyntheticTask& task = suite.task("rotate2");
    ExamplePair inst = suite.eval_instance(task, 1);
    FormattedExample ex =
        format_example(task, inst, PromptFormat::def_only, 0, task.few_shot_pool);
    CHECK(tok.decode(ex.hyper_tokens) == task.instruction);
    CHECK(tok.decode(ex.model_tokens) == inst.input);
    CHECK(tok.decode(ex.target_tokens) == inst.output);
}

TEST_CASE("manifest lists every task id with its split") {
    TaskSuite suite = TaskSuite::make(42);
    std::string m = suite.manifest_text();
    for (const auto& t : suite.tasks()) {
        CHECK(m.find(t.task_id) != std::string::npos);
    }
    CHECK(m.find("held_out") != std::string::npos);
    CHECK(m.find("train") != std::string::npos);
}
