#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace hint {

class Rng;

// Deterministic string-transformation tasks. Instructions share phrasing
// templates across tasks and differ in one operation word or digit, so a
// model that reads instructions can generalize to the held-out members of
// each family.

struct ExamplePair {
    std::string input;
    std::string output;
};

struct SyntheticTask {
    std::string task_id;
    std::string instruction;
    bool held_out = false;
    std::function<std::string(const std::string&)> apply;
    std::vector<ExamplePair> few_shot_pool; // disjoint from eval instances
};

class TaskSuite {
public:
    static TaskSuite make(std::uint64_t seed);

    const std::vector<SyntheticTask>& tasks() const { return tasks_; }
    const SyntheticTask& task(const std::string& task_id) const;
    std::vector<std::string> train_ids() const;
    std::vector<std::string> held_out_ids() const;
    std::uint64_t seed() const { return seed_; }

    // Deterministic eval instance i of a task; i < eval_block_size. The same
    // (seed, task, i) always yields the same pair.
    ExamplePair eval_instance(const SyntheticTask& task, int i) const;
    static constexpr int eval_block_size = 100;

    // Fresh training instance; rejection-sampled so its input never collides
    // with any task's eval block.
    ExamplePair sample_train_instance(const SyntheticTask& task, Rng& rng) const;

    bool is_eval_input(const std::string& input) const {
        return eval_inputs_.count(input) > 0;
    }

    std::string manifest_text() const; // human-readable listing

private:
    std::vector<SyntheticTask> tasks_;
    std::uint64_t seed_ = 0;
    std::unordered_set<std::string> eval_inputs_;

    std::string sample_input(Rng& rng) const;
    friend class TaskSuiteTestAccess;
};

// Exact string match.
double exact_match(const std::string& pred, const std::string& gold);
// Harmonic mean of byte-level precision/recall over token multisets.
double token_f1(const std::string& pred, const std::string& gold);

struct TaskEvalResult {
    std::string task_id;
    bool held_out = false;
    int instances = 0;
    double exact_match = 0.0;
    double token_f1 = 0.0;
};

struct EvalSummary {
    std::vector<TaskEvalResult> per_task;
    double mean_exact_match(bool held_out) const;
    double mean_token_f1(bool held_out) const;
};

// ---------------------------------------------------------------------------
// Prompt formatting. hyper_tokens feed the instruction encoder; model_tokens
// feed the input encoder; target_tokens are the supervised output (with eos).

enum class PromptFormat { def_only, def_plus_pos, concat_baseline, no_instruct };

struct FormattedExample {
    std::vector<int> hyper_tokens;
    std::vector<int> model_tokens;
    std::vector<int> target_tokens;
    std::string task_id;
};

FormattedExample format_example(const SyntheticTask& task, const ExamplePair& instance,
                                PromptFormat format, int shots,
                                std::span<const ExamplePair> shot_pool);

} // namespace hint
