#include "cli.hpp"

#include "CLI11.hpp"

#include "hint/checkpoint.hpp"
#include "hint/config.hpp"
#include "hint/corpus.hpp"
#include "hint/costmodel.hpp"
#include "hint/errors.hpp"
#include "hint/hash.hpp"
#include "hint/hypernet.hpp"
#include "hint/manifest.hpp"
#include "hint/task_cache.hpp"
#include "hint/tasks.hpp"
#include "hint/tokenizer.hpp"
#include "hint/training.hpp"
#include "hint/transformer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace hint {
namespace {

namespace fs = std::filesystem;

std::string trimmed(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

// Config file plus --set overrides, merged and checked against the known
// key list so typos fail with the offending key named.
KvConfig load_config(const std::string& path, const std::vector<std::string>& sets) {
    std::map<std::string, std::string> merged;
    if (!path.empty()) merged = KvConfig::parse_file(path).entries();
    for (const auto& s : sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("--set expects section.key=value, got '" + s + "'");
        }
        std::string key = trimmed(s.substr(0, eq));
        std::string value = trimmed(s.substr(eq + 1));
        if (key.find('.') == std::string::npos) {
            throw ConfigError("--set key must look like section.key, got '" + key + "'");
        }
        merged[key] = value;
    }
    std::ostringstream os;
    std::string section;
    for (const auto& [k, v] : merged) {
        std::string sec = k.substr(0, k.find('.'));
        if (sec != section) {
            os << "[" << sec << "]\n";
            section = sec;
        }
        os << k.substr(k.find('.') + 1) << " = " << v << "\n";
    }
    KvConfig kv = KvConfig::parse_text(os.str(), path.empty() ? "<command line>" : path);
    kv.require_known(known_config_keys());
    return kv;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw DataError("short write to " + path);
}

std::string csv_num(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

// Checkpoint rehydrated into a live model + hypernetwork. The model lives on
// the heap so the hypernetwork's back-pointer survives moves of this struct.
struct LoadedModel {
    CheckpointData ck;
    TrainConfig tc;
    std::unique_ptr<TransformerModel> model;
    Hypernetwork hyper;
};

LoadedModel load_model(const std::string& checkpoint_path) {
    LoadedModel lm;
    lm.ck = load_checkpoint_data(checkpoint_path);
    lm.tc = train_config_from_json(lm.ck.train_config_json);
    Rng rng(0); // shapes only; every value is overwritten below
    lm.model = std::make_unique<TransformerModel>(
        TransformerModel::init(lm.ck.model_config, rng));
    lm.hyper = Hypernetwork::init(lm.model.get(), rng, lm.ck.has_generator);
    apply_checkpoint_arrays(lm.ck, *lm.model, lm.hyper);
    return lm;
}

void print_log_row(const TrainLogRow& row, int total_steps) {
    std::cout << "  step " << std::setw(5) << row.step + 1 << "/" << total_steps
              << "  loss " << std::setw(10) << csv_num(row.loss) << "  grad_norm "
              << std::setw(10) << csv_num(row.grad_norm) << "  "
              << std::fixed << std::setprecision(1) << row.millis << " ms\n"
              << std::defaultfloat << std::setprecision(6);
    std::cout.flush();
}

// Log CSV deliberately omits wall-clock so artifacts are byte-identical
// across reruns of the same config + seed.
std::string train_log_csv(const std::vector<TrainLogRow>& rows,
                          const std::string& manifest_hash, int log_every) {
    std::ostringstream os;
    os << "# manifest " << manifest_hash << "\n";
    os << "step,loss,grad_norm\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i % static_cast<std::size_t>(log_every) != 0 && i + 1 != rows.size()) continue;
        os << rows[i].step << ',' << csv_num(rows[i].loss) << ','
           << csv_num(rows[i].grad_norm) << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// pretrain / finetune

struct TrainArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::string corpus_path = "data/corpus_sample.txt";
    std::string checkpoint_path;
    std::string out_dir;
};

void cmd_pretrain(const TrainArgs& a) {
    KvConfig kv = load_config(a.config_path, a.sets);
    ModelConfig mc = model_config_from_kv(kv);
    TrainConfig tc = train_config_from_kv(kv);
    tc.mode = TrainMode::pretrain;
    tc.validate();
    std::vector<int> corpus = load_corpus_file(a.corpus_path);

    fs::create_directories(a.out_dir);
    std::string ckpt_path = (fs::path(a.out_dir) / "checkpoint.bin").string();
    std::string log_path = (fs::path(a.out_dir) / "train_log.csv").string();

    RunManifest man;
    man.command = "pretrain";
    man.config_text = render_config(mc, tc);
    man.seed = tc.seed;
    man.input_fingerprint = hex_u64(file_content_hash(a.corpus_path));
    man.outputs = {ckpt_path, log_path};
    const std::string hash = man.content_hash();

    CorpusStream stream(std::move(corpus), tc.pretrain_seq_len);
    Trainer trainer(mc, tc);
    std::cout << "pretrain: " << tc.steps << " steps, batch " << tc.batch_size
              << ", seq_len " << tc.pretrain_seq_len << ", seed " << tc.seed << "\n";
    TrainResult res = trainer.run_pretrain(
        stream, [&](const TrainLogRow& r) { print_log_row(r, tc.steps); });

    write_text_file(log_path, train_log_csv(res.rows, hash, tc.log_every));
    save_checkpoint(ckpt_path, trainer.model(), trainer.hypernet(),
                    train_config_to_json(tc), hash, trainer.steps_taken());
    man.write((fs::path(a.out_dir) / "manifest.json").string());
    std::cout << "final loss " << csv_num(res.final_loss) << "\n"
              << "wrote " << ckpt_path << "\n";
}

void cmd_finetune(const TrainArgs& a) {
    KvConfig kv = load_config(a.config_path, a.sets);
    TrainConfig tc = train_config_from_kv(kv);
    tc.mode = TrainMode::finetune;
    tc.validate();

    std::optional<CheckpointData> ck;
    ModelConfig mc;
    if (!a.checkpoint_path.empty()) {
        ck = load_checkpoint_data(a.checkpoint_path);
        bool has_model_keys = false;
        for (const auto& [k, v] : kv.entries()) {
            if (k.rfind("model.", 0) == 0) has_model_keys = true;
        }
        if (has_model_keys && !(model_config_from_kv(kv) == ck->model_config)) {
            throw ConfigError(
                "config model section conflicts with the checkpoint architecture; "
                "drop the model.* keys or make them match");
        }
        mc = ck->model_config;
    } else {
        mc = model_config_from_kv(kv);
    }

    fs::create_directories(a.out_dir);
    std::string ckpt_path = (fs::path(a.out_dir) / "checkpoint.bin").string();
    std::string log_path = (fs::path(a.out_dir) / "train_log.csv").string();
    std::string suite_path = (fs::path(a.out_dir) / "suite_manifest.txt").string();

    RunManifest man;
    man.command = "finetune";
    man.config_text = render_config(mc, tc);
    man.seed = tc.seed;
    man.input_fingerprint = ck ? ck->fingerprint : "";
    man.outputs = {ckpt_path, log_path, suite_path};
    const std::string hash = man.content_hash();

    TaskSuite suite = TaskSuite::make(tc.seed);
    std::optional<Trainer> trainer;
    if (ck) {
        trainer.emplace(*ck, tc);
        std::cout << "finetune from " << a.checkpoint_path << " (" << ck->steps_taken
                  << " prior steps)\n";
    } else {
        trainer.emplace(mc, tc);
        std::cout << "finetune from scratch\n";
    }
    std::cout << "setting " << to_string(tc.setting) << ", ablation "
              << to_string(tc.ablation) << ", " << tc.steps << " steps, batch "
              << tc.batch_size << ", seed " << tc.seed << "\n";
    TrainResult res = trainer->run_finetune(
        suite, [&](const TrainLogRow& r) { print_log_row(r, tc.steps); });

    write_text_file(log_path, train_log_csv(res.rows, hash, tc.log_every));
    write_text_file(suite_path, "# manifest " + hash + "\n" + suite.manifest_text());
    save_checkpoint(ckpt_path, trainer->model(), trainer->hypernet(),
                    train_config_to_json(tc), hash, trainer->steps_taken());
    man.write((fs::path(a.out_dir) / "manifest.json").string());
    std::cout << "final loss " << csv_num(res.final_loss) << "\n"
              << "wrote " << ckpt_path << "\n";
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string checkpoint_path;
    std::string setting;
    std::string ablation;
    int shots = 0;
    int instances = 20;
    int max_decode_len = 20;
    std::string split = "all";
    std::string cache_dir;
    std::string out_dir;
};

void cmd_eval(const EvalArgs& a) {
    LoadedModel lm = load_model(a.checkpoint_path);
    EvalOptions opt;
    opt.setting = a.setting.empty() ? lm.tc.setting : run_setting_from_string(a.setting);
    opt.ablation = a.ablation.empty() ? lm.tc.ablation : ablation_from_string(a.ablation);
    opt.shots = a.shots;
    opt.instances = a.instances;
    opt.max_decode_len = a.max_decode_len;
    if (a.split == "train") {
        opt.include_held_out = false;
    } else if (a.split == "held_out") {
        opt.include_train = false;
    } else if (a.split != "all") {
        throw ConfigError("--split must be all, train or held_out, got '" + a.split + "'");
    }
    if (generator_enabled(opt.setting, opt.ablation) && !lm.ck.has_generator) {
        throw ConfigError("checkpoint has no generator bank; evaluate with "
                          "--ablation no_peft or a non-hint --setting");
    }

    TaskSuite suite = TaskSuite::make(lm.tc.seed);

    // With a cache directory, contexts are served from disk when fresh and
    // rebuilt (and re-stored) when missing, stale, or built for different
    // instruction text.
    std::optional<TaskCache> cache;
    ContextProvider provider;
    int cache_hits = 0, cache_builds = 0;
    if (!a.cache_dir.empty()) {
        cache.emplace(a.cache_dir);
        provider = [&](const SyntheticTask& task, std::span<const int> toks) {
            std::vector<int> want(toks.begin(), toks.end());
            if (cache->contains(task.task_id)) {
                try {
                    TaskContext ctx =
                        cache->get(task.task_id, lm.ck.model_config, lm.ck.fingerprint);
                    if (ctx.instruction_tokens == want) {
                        ++cache_hits;
                        return ctx;
                    }
                } catch (const DataError&) {
                    // stale entry; fall through and overwrite
                }
            }
            TaskContext ctx = lm.hyper.build_task_context(task.task_id, want);
            cache->put(ctx, lm.ck.model_config, lm.ck.fingerprint);
            ++cache_builds;
            return ctx;
        };
    }

    EvalSummary sum = evaluate(*lm.model, lm.hyper, suite, opt, provider);

    fs::create_directories(a.out_dir);
    std::string results_path = (fs::path(a.out_dir) / "results.csv").string();
    RunManifest man;
    man.command = "eval";
    std::ostringstream cfg;
    cfg << "[eval]\n"
        << "setting = " << to_string(opt.setting) << "\n"
        << "ablation = " << to_string(opt.ablation) << "\n"
        << "shots = " << opt.shots << "\n"
        << "instances = " << opt.instances << "\n"
        << "max_decode_len = " << opt.max_decode_len << "\n"
        << "split = " << a.split << "\n";
    man.config_text = cfg.str();
    man.seed = lm.tc.seed;
    man.input_fingerprint = lm.ck.fingerprint;
    man.outputs = {results_path};
    const std::string hash = man.content_hash();

    std::ostringstream csv;
    csv << "# manifest " << hash << "\n";
    csv << "task,split,instances,exact_match,token_f1\n";
    std::cout << "task            split     em      f1\n";
    for (const auto& r : sum.per_task) {
        const char* split = r.held_out ? "held_out" : "train";
        csv << r.task_id << ',' << split << ',' << r.instances << ','
            << csv_num(r.exact_match) << ',' << csv_num(r.token_f1) << "\n";
        std::cout << std::left << std::setw(16) << r.task_id << std::setw(10) << split
                  << std::right << std::fixed << std::setprecision(3) << std::setw(6)
                  << r.exact_match << "  " << std::setw(6) << r.token_f1 << "\n"
                  << std::defaultfloat << std::setprecision(6);
    }
    if (opt.include_train) {
        csv << "mean,train," << opt.instances << ','
            << csv_num(sum.mean_exact_match(false)) << ','
            << csv_num(sum.mean_token_f1(false)) << "\n";
        std::cout << "mean train    em " << csv_num(sum.mean_exact_match(false))
                  << "  f1 " << csv_num(sum.mean_token_f1(false)) << "\n";
    }
    if (opt.include_held_out) {
        csv << "mean,held_out," << opt.instances << ','
            << csv_num(sum.mean_exact_match(true)) << ','
            << csv_num(sum.mean_token_f1(true)) << "\n";
        std::cout << "mean held_out em " << csv_num(sum.mean_exact_match(true))
                  << "  f1 " << csv_num(sum.mean_token_f1(true)) << "\n";
    }
    if (cache) {
        std::cout << "cache: " << cache_hits << " hits, " << cache_builds
                  << " rebuilds (" << cache->dir() << ")\n";
    }
    write_text_file(results_path, csv.str());
    man.write((fs::path(a.out_dir) / "manifest.json").string());
    std::cout << "wrote " << results_path << "\n";
}

// ---------------------------------------------------------------------------
// cost-report

struct CostArgs {
    std::string preset = "sni";
    std::int64_t examples = 100;
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir;
};

void cmd_cost_report(const CostArgs& a) {
    ModelConfig mc;
    std::string arch_desc;
    if (a.config_path.empty() && a.sets.empty()) {
        mc = paper_scale_config();
        arch_desc = "published-scale reference";
    } else {
        mc = model_config_from_kv(load_config(a.config_path, a.sets));
        arch_desc = "from config";
    }
    std::int64_t n = backbone_param_count(mc);
    std::int64_t np = generator_param_count(mc);
    std::int64_t adapted = injected_param_count(mc);

    std::vector<CostScenario> scenarios;
    std::string reference;
    if (a.preset == "sni") {
        scenarios = sni_scenarios(n, np, adapted, a.examples);
        reference = "def";
    } else if (a.preset == "p3") {
        scenarios = p3_scenarios(n, np, adapted, a.examples);
        reference = "prompt";
    } else {
        throw ConfigError("--preset must be sni or p3, got '" + a.preset + "'");
    }
    CostReport report = relative_flops_report(scenarios, reference);

    fs::create_directories(a.out_dir);
    std::string csv_path = (fs::path(a.out_dir) / "cost_report.csv").string();
    std::string md_path = (fs::path(a.out_dir) / "cost_report.md").string();
    std::string sweep_path = (fs::path(a.out_dir) / "flops_vs_t.csv").string();
    std::string mem_path = (fs::path(a.out_dir) / "memory_sweep.csv").string();

    RunManifest man;
    man.command = "cost-report";
    std::ostringstream cfg;
    cfg << "[cost]\n"
        << "preset = " << a.preset << "\n"
        << "examples = " << a.examples << "\n"
        << "architecture = " << arch_desc << "\n"
        << "model_params = " << n << "\n"
        << "generator_params = " << np << "\n"
        << "injected_params = " << adapted << "\n";
    man.config_text = cfg.str();
    man.seed = 0;
    man.outputs = {csv_path, md_path, sweep_path, mem_path};
    const std::string hash = man.content_hash();

    std::vector<std::int64_t> t_values = {10, 25, 50, 69, 100, 133,
                                          150, 197, 250, 300, 350, 400};
    auto sweep = instruction_length_sweep(scenarios.front(), t_values);
    auto mem = memory_sweep(2 * mc.layers, mc.d_model, mc.heads, mc.head_dim,
                            mc.prefix_length, mc.adapter_bottleneck,
                            {64, 128, 256, 512, 1024, 2048, 4096});

    write_text_file(csv_path, cost_report_csv(report, hash));
    write_text_file(md_path, cost_report_markdown(report) + "\n_manifest " + hash + "_\n");
    write_text_file(sweep_path, sweep_csv(sweep, hash));
    write_text_file(mem_path, memory_sweep_csv(mem, hash));
    man.write((fs::path(a.out_dir) / "manifest.json").string());

    std::cout << "architecture: " << arch_desc << "  N=" << n << "  N'=" << np
              << "  A=" << adapted << "\n\n"
              << cost_report_markdown(report) << "\nwrote " << csv_path << "\n";
}

// ---------------------------------------------------------------------------
// latency-bench

struct LatencyArgs {
    std::string checkpoint_path;
    int examples = 100;
    int reps = 5;
    std::vector<int> shots = {0, 1, 2, 3};
    std::string out_dir;
};

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double p90_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t idx = static_cast<std::size_t>(
        std::ceil(0.9 * static_cast<double>(v.size()))) - 1;
    return v[std::min(idx, v.size() - 1)];
}

void cmd_latency_bench(const LatencyArgs& a) {
    if (a.examples < 1 || a.reps < 1 || a.shots.empty()) {
        throw ConfigError("latency-bench needs --examples >= 1, --reps >= 1 "
                          "and at least one --shots value");
    }
    LoadedModel lm = load_model(a.checkpoint_path);
    if (lm.tc.setting != RunSetting::hint) {
        throw ConfigError("latency-bench requires a hint-setting checkpoint");
    }
    bool use_fusion = fusion_enabled(lm.tc.setting, lm.tc.ablation);

    // Instruction-suite median token lengths: instruction 69 (+64 per shot),
    // instance 44, combined baseline prompt 133 (+33 per shot), one output
    // token. Inputs are synthetic byte runs padded to those lengths.
    auto hyper_len = [](int shots) { return 69 + 64 * shots; };
    auto concat_len = [](int shots) { return 133 + 33 * shots; };
    int max_shots = *std::max_element(a.shots.begin(), a.shots.end());
    int needed = std::max(hyper_len(max_shots), concat_len(max_shots)) + 1;
    if (needed > lm.ck.model_config.max_seq_len) {
        throw ConfigError("model max_seq_len " +
                          std::to_string(lm.ck.model_config.max_seq_len) +
                          " too short for the benchmark lengths (need " +
                          std::to_string(needed) + ")");
    }
    auto make_tokens = [](int len) { return std::vector<int>(len, int('a')); };
    const std::vector<int> instance_tokens = make_tokens(44);

    fs::create_directories(a.out_dir);
    std::string csv_path = (fs::path(a.out_dir) / "latency.csv").string();
    RunManifest man;
    man.command = "latency-bench";
    std::ostringstream cfg;
    cfg << "[latency]\nexamples = " << a.examples << "\nreps = " << a.reps << "\nshots =";
    for (int s : a.shots) cfg << ' ' << s;
    cfg << "\n";
    man.config_text = cfg.str();
    man.seed = lm.tc.seed;
    man.input_fingerprint = lm.ck.fingerprint;
    man.outputs = {csv_path};
    const std::string hash = man.content_hash();

    using clock = std::chrono::steady_clock;
    std::ostringstream csv;
    csv << "# manifest " << hash << "\n";
    csv << "shots,mode,median_ms,p90_ms\n";
    std::cout << "timing " << a.examples << " examples x " << a.reps << " reps\n";
    std::map<int, double> hint_median, concat_median;
    for (int shots : a.shots) {
        std::vector<int> hyper_tokens = make_tokens(hyper_len(shots));
        std::vector<int> prompt_tokens = make_tokens(concat_len(shots));
        std::vector<double> hint_ms, concat_ms;
        for (int rep = 0; rep < a.reps; ++rep) {
            auto t0 = clock::now();
            TaskContext ctx = lm.hyper.build_task_context("bench", hyper_tokens);
            for (int e = 0; e < a.examples; ++e) {
                predict_with_context(*lm.model, &ctx, instance_tokens, use_fusion, 1);
            }
            auto t1 = clock::now();
            for (int e = 0; e < a.examples; ++e) {
                predict_with_context(*lm.model, nullptr, prompt_tokens, false, 1);
            }
            auto t2 = clock::now();
            hint_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            concat_ms.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
        }
        hint_median[shots] = median_of(hint_ms);
        concat_median[shots] = median_of(concat_ms);
        csv << shots << ",hint," << csv_num(median_of(hint_ms)) << ','
            << csv_num(p90_of(hint_ms)) << "\n";
        csv << shots << ",concat," << csv_num(median_of(concat_ms)) << ','
            << csv_num(p90_of(concat_ms)) << "\n";
        std::cout << "  shots " << shots << ": hint " << std::fixed
                  << std::setprecision(1) << median_of(hint_ms) << " ms, concat "
                  << median_of(concat_ms) << " ms\n"
                  << std::defaultfloat << std::setprecision(6);
    }
    if (a.shots.size() > 1) {
        int lo = *std::min_element(a.shots.begin(), a.shots.end());
        double dh = hint_median[max_shots] - hint_median[lo];
        double dc = concat_median[max_shots] - concat_median[lo];
        std::cout << "growth " << lo << "->" << max_shots << " shots: hint "
                  << csv_num(dh) << " ms, concat " << csv_num(dc) << " ms";
        if (dc > 0) {
            std::cout << " (ratio " << std::fixed << std::setprecision(3) << dh / dc
                      << ")" << std::defaultfloat << std::setprecision(6);
        }
        std::cout << "\n";
    }
    write_text_file(csv_path, csv.str());
    man.write((fs::path(a.out_dir) / "manifest.json").string());
    std::cout << "wrote " << csv_path << "\n";
}

// ---------------------------------------------------------------------------
// cache warm / list / evict

struct CacheArgs {
    std::string checkpoint_path;
    std::string dir;
    int shots = 0;
    std::vector<std::string> tasks;
    bool all = false;
};

void cmd_cache_warm(const CacheArgs& a) {
    LoadedModel lm = load_model(a.checkpoint_path);
    if (lm.tc.setting != RunSetting::hint) {
        throw ConfigError("cache warm requires a hint-setting checkpoint");
    }
    TaskSuite suite = TaskSuite::make(lm.tc.seed);
    TaskCache cache(a.dir);
    PromptFormat fmt = a.shots > 0 ? PromptFormat::def_plus_pos : PromptFormat::def_only;
    std::uint64_t total_bytes = 0;
    for (const auto& task : suite.tasks()) {
        std::span<const ExamplePair> pool(task.few_shot_pool.data(),
                                          task.few_shot_pool.size());
        if (a.shots > static_cast<int>(pool.size())) {
            throw ConfigError("--shots exceeds the few-shot pool size of " +
                              std::to_string(pool.size()));
        }
        FormattedExample probe =
            format_example(task, suite.eval_instance(task, 0), fmt, a.shots,
                           pool.subspan(0, static_cast<std::size_t>(a.shots)));
        TaskContext ctx = lm.hyper.build_task_context(task.task_id, probe.hyper_tokens);
        std::string path = cache.put(ctx, lm.ck.model_config, lm.ck.fingerprint);
        total_bytes += fs::file_size(path);
        std::cout << "  " << task.task_id << " -> " << path << "\n";
    }
    std::cout << "warmed " << suite.tasks().size() << " contexts, "
              << total_bytes << " bytes\n";
}

void cmd_cache_list(const CacheArgs& a) {
    TaskCache cache(a.dir);
    auto entries = cache.list();
    std::cout << "task            bytes     checkpoint\n";
    for (const auto& e : entries) {
        std::cout << std::left << std::setw(16) << e.task_id << std::setw(10) << e.bytes
                  << e.checkpoint_fingerprint << "\n";
    }
    std::cout << entries.size() << " cached context(s) in " << cache.dir() << "\n";
}

void cmd_cache_evict(const CacheArgs& a) {
    if (!a.all && a.tasks.empty()) {
        throw ConfigError("cache evict needs --task ids or --all");
    }
    TaskCache cache(a.dir);
    int evicted = 0;
    if (a.all) {
        for (const auto& e : cache.list()) {
            cache.evict(e.task_id);
            ++evicted;
        }
    } else {
        for (const auto& id : a.tasks) {
            if (!cache.evict(id)) {
                throw DataError("no cached context for task '" + id + "'");
            }
            ++evicted;
        }
    }
    std::cout << "evicted " << evicted << " context(s)\n";
}

void cmd_show_config(const std::string& config_path, const std::vector<std::string>& sets) {
    KvConfig kv = load_config(config_path, sets);
    ModelConfig mc = model_config_from_kv(kv);
    TrainConfig tc = train_config_from_kv(kv);
    std::cout << render_config(mc, tc);
}

} // namespace

int cli_run(int argc, const char* const* argv) {
    CLI::App app{"hypernetwork instruction tuning workbench"};
    app.require_subcommand(1);

    TrainArgs pre;
    auto* cmd_pre = app.add_subcommand("pretrain", "Pretrain on a chunked text corpus");
    cmd_pre->add_option("--config", pre.config_path, "Config file (defaults if omitted)");
    cmd_pre->add_option("--set", pre.sets, "Override section.key=value (repeatable)");
    cmd_pre->add_option("--corpus", pre.corpus_path, "Corpus text file")
        ->capture_default_str();
    pre.out_dir = "out/pretrain";
    cmd_pre->add_option("--out-dir", pre.out_dir, "Artifact directory")
        ->capture_default_str();

    TrainArgs fin;
    auto* cmd_fin = app.add_subcommand("finetune", "Train on the instruction task suite");
    cmd_fin->add_option("--config", fin.config_path, "Config file (defaults if omitted)");
    cmd_fin->add_option("--set", fin.sets, "Override section.key=value (repeatable)");
    cmd_fin->add_option("--checkpoint", fin.checkpoint_path,
                        "Starting checkpoint (fresh init if omitted)");
    fin.out_dir = "out/finetune";
    cmd_fin->add_option("--out-dir", fin.out_dir, "Artifact directory")
        ->capture_default_str();

    EvalArgs ev;
    auto* cmd_ev = app.add_subcommand("eval", "Evaluate a checkpoint on the task suite");
    cmd_ev->add_option("--checkpoint", ev.checkpoint_path, "Checkpoint to evaluate")
        ->required();
    cmd_ev->add_option("--setting", ev.setting,
                       "hint, concat_baseline or no_instruct (default: from checkpoint)");
    cmd_ev->add_option("--ablation", ev.ablation, "Ablation (default: from checkpoint)");
    cmd_ev->add_option("--shots", ev.shots, "Few-shot examples in the instruction")
        ->capture_default_str();
    cmd_ev->add_option("--instances", ev.instances, "Eval instances per task")
        ->capture_default_str();
    cmd_ev->add_option("--max-decode-len", ev.max_decode_len, "Decode length cap")
        ->capture_default_str();
    cmd_ev->add_option("--split", ev.split, "all, train or held_out")
        ->capture_default_str();
    cmd_ev->add_option("--cache-dir", ev.cache_dir,
                       "Serve task contexts from this cache directory");
    ev.out_dir = "out/eval";
    cmd_ev->add_option("--out-dir", ev.out_dir, "Artifact directory")
        ->capture_default_str();

    CostArgs cost;
    auto* cmd_cost = app.add_subcommand("cost-report",
                                        "Analytic FLOPs and memory comparison");
    cmd_cost->add_option("--preset", cost.preset, "Scenario preset: sni or p3")
        ->capture_default_str();
    cmd_cost->add_option("--examples", cost.examples, "Examples per task (n)")
        ->capture_default_str();
    cmd_cost->add_option("--config", cost.config_path,
                         "Count parameters from this architecture instead of the "
                         "published-scale reference");
    cmd_cost->add_option("--set", cost.sets, "Override section.key=value (repeatable)");
    cost.out_dir = "out/cost";
    cmd_cost->add_option("--out-dir", cost.out_dir, "Artifact directory")
        ->capture_default_str();

    LatencyArgs lat;
    auto* cmd_lat = app.add_subcommand("latency-bench",
                                       "Wall-clock instruction-processing benchmark");
    cmd_lat->add_option("--checkpoint", lat.checkpoint_path, "Checkpoint to time")
        ->required();
    cmd_lat->add_option("--examples", lat.examples, "Same-task examples per run")
        ->capture_default_str();
    cmd_lat->add_option("--reps", lat.reps, "Repetitions per measurement")
        ->capture_default_str();
    cmd_lat->add_option("--shots", lat.shots, "Shot counts to sweep")
        ->capture_default_str();
    lat.out_dir = "out/latency";
    cmd_lat->add_option("--out-dir", lat.out_dir, "Artifact directory")
        ->capture_default_str();

    CacheArgs cache;
    auto* cmd_cache = app.add_subcommand("cache", "Manage the task-context cache");
    cmd_cache->require_subcommand(1);
    auto* cmd_warm = cmd_cache->add_subcommand("warm", "Build and store all task contexts");
    cmd_warm->add_option("--checkpoint", cache.checkpoint_path, "Checkpoint")->required();
    cmd_warm->add_option("--dir", cache.dir, "Cache directory")->required();
    cmd_warm->add_option("--shots", cache.shots, "Few-shot examples in the instruction")
        ->capture_default_str();
    auto* cmd_list = cmd_cache->add_subcommand("list", "List cached contexts");
    cmd_list->add_option("--dir", cache.dir, "Cache directory")->required();
    auto* cmd_evict = cmd_cache->add_subcommand("evict", "Remove cached contexts");
    cmd_evict->add_option("--dir", cache.dir, "Cache directory")->required();
    cmd_evict->add_option("--task", cache.tasks, "Task id (repeatable)");
    cmd_evict->add_flag("--all", cache.all, "Evict everything");

    std::string show_cfg_path;
    std::vector<std::string> show_sets;
    auto* cmd_show = app.add_subcommand("show-config",
                                        "Print the effective configuration");
    cmd_show->add_option("--config", show_cfg_path, "Config file (defaults if omitted)");
    cmd_show->add_option("--set", show_sets, "Override section.key=value (repeatable)");

    try {
        app.parse(argc, argv);
        if (cmd_pre->parsed()) cmd_pretrain(pre);
        if (cmd_fin->parsed()) cmd_finetune(fin);
        if (cmd_ev->parsed()) cmd_eval(ev);
        if (cmd_cost->parsed()) cmd_cost_report(cost);
        if (cmd_lat->parsed()) cmd_latency_bench(lat);
        if (cmd_cache->parsed()) {
            if (cmd_warm->parsed()) cmd_cache_warm(cache);
            if (cmd_list->parsed()) cmd_cache_list(cache);
            if (cmd_evict->parsed()) cmd_cache_evict(cache);
        }
        if (cmd_show->parsed()) cmd_show_config(show_cfg_path, show_sets);
        return 0;
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace hint
