#include "hint/tasks.hpp"

#include "hint/errors.hpp"
#include "hint/rng.hpp"
#include "hint/tokenizer.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace hint {

namespace {

std::string reverse_text(const std::string& s) {
    return std::string(s.rbegin(), s.rend());
}

std::string caesar_shift(const std::string& s, int k) {
    std::string out = s;
    for (char& c : out) {
        if (c >= 'a' && c <= 'z') c = static_cast<char>('a' + (c - 'a' + k) % 26);
    }
    return out;
}

std::string rotate_right(const std::string& s, int k) {
    int n = static_cast<int>(s.size());
    if (n == 0) return s;
    std::string out(s.size(), ' ');
    for (int i = 0; i < n; ++i) {
        out[static_cast<std::size_t>((i + k) % n)] = s[static_cast<std::size_t>(i)];
    }
    return out;
}

std::string select_letter(const std::string& s, int k) {
    // 1-based; instances are always long enough by construction.
    if (k < 1 || k > static_cast<int>(s.size())) return "";
    return std::string(1, s[static_cast<std::size_t>(k - 1)]);
}

std::string repeat_text(const std::string& s, int k) {
    std::string out;
    for (int i = 0; i < k; ++i) out += s;
    return out;
}

SyntheticTask make_task(std::string id, std::string instruction, bool held_out,
                        std::function<std::string(const std::string&)> fn) {
    SyntheticTask t;
    t.task_id = std::move(id);
    t.instruction = std::move(instruction);
    t.held_out = held_out;
    t.apply = std::move(fn);
    return t;
}

constexpr int min_len = 3;
constexpr int max_len = 6;
constexpr int few_shot_pool_size = 8;

} // namespace

std::string TaskSuite::sample_input(Rng& rng) const {
    int len = rng.uniform_int(min_len, max_len);
    std::string s(static_cast<std::size_t>(len), 'a');
    for (char& c : s) c = static_cast<char>('a' + rng.uniform_int(0, 9));
    return s;
}

TaskSuite TaskSuite::make(std::uint64_t seed) {
    TaskSuite suite;
    suite.seed_ = seed;

    // Three parameterized families plus two singletons. One member of each
    // family is held out, so zero-shot evaluation tests whether instruction
    // reading interpolates within a family it has seen varied.
    auto caesar_instr = [](int k) {
        std::ostringstream os;
        os << "shift each letter " << k << (k == 1 ? " step" : " steps")
           << " forward in the alphabet.";
        return os.str();
    };
    auto rotate_instr = [](int k) {
        std::ostringstream os;
        os << "rotate the text right by " << k << (k == 1 ? " place." : " places.");
        return os.str();
    };
    auto select_instr = [](int k) {
        std::ostringstream os;
        os << "print only letter " << k << " of the text.";
        return os.str();
    };

    auto& tasks = suite.tasks_;
    tasks.push_back(make_task("reverse", "write the text backwards.", false, reverse_text));
    for (int k : {1, 3, 4}) {
        tasks.push_back(make_task("caesar" + std::to_string(k), caesar_instr(k), false,
                                  [k](const std::string& s) { return caesar_shift(s, k); }));
    }
    for (int k : {1, 2}) {
        tasks.push_back(make_task("rotate" + std::to_string(k), rotate_instr(k), false,
                                  [k](const std::string& s) { return rotate_right(s, k); }));
    }
    for (int k : {2, 3}) {
        tasks.push_back(make_task("select" + std::to_string(k), select_instr(k), false,
                                  [k](const std::string& s) { return select_letter(s, k); }));
    }
    tasks.push_back(make_task("repeat2", "write the text 2 times.", false,
                              [](const std::string& s) { return repeat_text(s, 2); }));
    tasks.push_back(make_task("caesar2", caesar_instr(2), true,
                              [](const std::string& s) { return caesar_shift(s, 2); }));
    tasks.push_back(make_task("rotate3", rotate_instr(3), true,
                              [](const std::string& s) { return rotate_right(s, 3); }));
    tasks.push_back(make_task("select1", select_instr(1), true,
                              [](const std::string& s) { return select_letter(s, 1); }));

    // Freeze the eval blocks up front; their inputs are off-limits to
    // training instances and few-shot pools for every task.
    for (const auto& t : tasks) {
        for (int i = 0; i < eval_block_size; ++i) {
            suite.eval_inputs_.insert(suite.eval_instance(t, i).input);
        }
    }
    for (auto& t : tasks) {
        Rng rng = Rng::substream(seed, "pool:" + t.task_id);
        while (static_cast<int>(t.few_shot_pool.size()) < few_shot_pool_size) {
            std::string in = suite.sample_input(rng);
            if (suite.eval_inputs_.count(in)) continue;
            t.few_shot_pool.push_back({in, t.apply(in)});
        }
    }
    return suite;
}

const SyntheticTask& TaskSuite::task(const std::string& task_id) const {
    for (const auto& t : tasks_) {
        if (t.task_id == task_id) return t;
    }
    throw DataError("unknown task '" + task_id + "'");
}

std::vector<std::string> TaskSuite::train_ids() const {
    std::vector<std::string> out;
    for (const auto& t : tasks_) {
        if (!t.held_out) out.push_back(t.task_id);
    }
    return out;
}

std::vector<std::string> TaskSuite::held_out_ids() const {
    std::vector<std::string> out;
    for (const auto& t : tasks_) {
        if (t.held_out) out.push_back(t.task_id);
    }
    return out;
}

ExamplePair TaskSuite::eval_instance(const SyntheticTask& task, int i) const {
    if (i < 0 || i >= eval_block_size) {
        throw DataError("eval instance index " + std::to_string(i) + " out of range");
    }
    Rng rng = Rng::substream(seed_, "eval:" + task.task_id + ":" + std::to_string(i));
    std::string in = sample_input(rng);
    return {in, task.apply(in)};
}

ExamplePair TaskSuite::sample_train_instance(const SyntheticTask& task, Rng& rng) const {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::string in = sample_input(rng);
        if (eval_inputs_.count(in)) continue;
        return {in, task.apply(in)};
    }
    throw DataError("sample_train_instance: rejection sampling failed for '" +
                    task.task_id + "'");
}

std::string TaskSuite::manifest_text() const {
    std::ostringstream os;
    os << "task suite (seed " << seed_ << ", " << tasks_.size() << " tasks)\n";
    os << "inputs: lowercase a-j, length " << min_len << "-" << max_len
       << "; eval block " << eval_block_size << " instances per task\n\n";
    for (const auto& t : tasks_) {
        os << (t.held_out ? "held_out " : "train    ") << t.task_id << ": \""
           << t.instruction << "\"\n";
    }
    return os.str();
}

double exact_match(const std::string& pred, const std::string& gold) {
    return pred == gold ? 1.0 : 0.0;
}

double token_f1(const std::string& pred, const std::string& gold) {
    if (pred.empty() && gold.empty()) return 1.0;
    if (pred.empty() || gold.empty()) return 0.0;
    std::map<char, int> pc, gc;
    for (char c : pred) ++pc[c];
    for (char c : gold) ++gc[c];
    int overlap = 0;
    for (const auto& [c, n] : pc) {
        auto it = gc.find(c);
        if (it != gc.end()) overlap += std::min(n, it->second);
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
    double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
    return 2.0 * precision * recall / (precision + recall);
}

double EvalSummary::mean_exact_match(bool held_out) const {
    double s = 0.0;
    int n = 0;
    for (const auto& r : per_task) {
        if (r.held_out == held_out) {
            s += r.exact_match;
            ++n;
        }
    }
    return n == 0 ? 0.0 : s / n;
}

double EvalSummary::mean_token_f1(bool held_out) const {
    double s = 0.0;
    int n = 0;
    for (const auto& r : per_task) {
        if (r.held_out == held_out) {
            s += r.token_f1;
            ++n;
        }
    }
    return n == 0 ? 0.0 : s / n;
}

FormattedExample format_example(const SyntheticTask& task, const ExamplePair& instance,
                                PromptFormat format, int shots,
                                std::span<const ExamplePair> shot_pool) {
    if (shots < 0) throw ContractError("format_example: negative shot count");
    if (format == PromptFormat::def_plus_pos || format == PromptFormat::concat_baseline) {
        if (shots > static_cast<int>(shot_pool.size())) {
            throw DataError("format_example: " + std::to_string(shots) +
                            " shots requested, pool has " +
                            std::to_string(shot_pool.size()));
        }
    }
    ByteTokenizer tok;
    FormattedExample out;
    out.task_id = task.task_id;

    auto append = [](std::vector<int>& dst, const std::vector<int>& src) {
        dst.insert(dst.end(), src.begin(), src.end());
    };
    auto append_shot = [&](std::vector<int>& dst, const ExamplePair& ex) {
        dst.push_back(ByteTokenizer::sep_id);
        append(dst, tok.encode(ex.input));
        dst.push_back(ByteTokenizer::sep_id);
        append(dst, tok.encode(ex.output));
    };

    switch (format) {
        case PromptFormat::def_only:
            out.hyper_tokens = tok.encode(task.instruction);
            out.hyper_tokens.push_back(ByteTokenizer::eos_id);
            out.model_tokens = tok.encode(instance.input);
            break;
        case PromptFormat::def_plus_pos:
            out.hyper_tokens = tok.encode(task.instruction);
            for (int s = 0; s < shots; ++s) {
                append_shot(out.hyper_tokens, shot_pool[static_cast<std::size_t>(s)]);
            }
            out.hyper_tokens.push_back(ByteTokenizer::eos_id);
            out.model_tokens = tok.encode(instance.input);
            break;
        case PromptFormat::concat_baseline:
            out.model_tokens = tok.encode(task.instruction);
            for (int s = 0; s < shots; ++s) {
                append_shot(out.model_tokens, shot_pool[static_cast<std::size_t>(s)]);
            }
            out.model_tokens.push_back(ByteTokenizer::sep_id);
            append(out.model_tokens, tok.encode(instance.input));
            break;
        case PromptFormat::no_instruct:
            out.model_tokens = tok.encode(instance.input);
            break;
    }
    out.model_tokens.push_back(ByteTokenizer::eos_id);
    out.target_tokens = tok.encode(instance.output);
    out.target_tokens.push_back(ByteTokenizer::eos_id);
    return out;
}

} // namespace hint
