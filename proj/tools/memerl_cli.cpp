// memerl: command-line driver for the hateful-meme reasoning pipeline.
//
//   memerl synth | sft | grpo | eval | distill | judge | plot | infer | schema
//
// Exit codes: 0 success, 2 usage or configuration error, 3 model-service failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "memerl/config.hpp"
#include "memerl/corpus.hpp"
#include "memerl/errors.hpp"
#include "memerl/inference.hpp"
#include "memerl/modelsvc.hpp"
#include "memerl/plot.hpp"
#include "memerl/telemetry.hpp"
#include "memerl/trainer.hpp"
#include "memerl/util.hpp"

namespace fs = std::filesystem;
using namespace memerl;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitService = 3;

struct CommonOptions {
    std::string config_file;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("-c,--config", o.config_file, "config file (JSON or key = value lines)");
    cmd->add_option("--set", o.overrides, "override one config key: key=value (repeatable)");
    cmd->add_option("--seed", o.seed, "global seed (overrides config and RUN_SEED)");
}

RunConfig load_config(const CommonOptions& o, const std::vector<std::pair<std::string, std::string>>& flags = {}) {
    RunConfig cfg;
    cfg.apply_seed();
    if (!o.config_file.empty()) apply_config_file(cfg, o.config_file);
    if (const char* env = std::getenv("RUN_SEED"); env && *env) set_config_value(cfg, "seed", env);
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InvalidConfig("--set expects key=value, got '" + kv + "'");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [k, v] : flags) set_config_value(cfg, k, v);
    if (o.seed) set_config_value(cfg, "seed", std::to_string(*o.seed));
    validate(cfg);
    return cfg;
}

std::string file_digest(const std::string& path) {
    return strprintf("%016llx", static_cast<unsigned long long>(fnv1a64(read_file(path))));
}

void write_manifest(const fs::path& dir, std::string_view command, const RunConfig& cfg,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                    const ojson& extra = ojson::object()) {
    ojson m;
    m["command"] = std::string(command);
    m["version"] = std::string(version_string());
    m["seed"] = cfg.seed;
    m["config_hash"] = config_hash(cfg);
    m["config"] = ojson::parse(config_to_json(cfg));
    auto& in = m["inputs"] = ojson::array();
    for (const auto& p : inputs) in.push_back({{"path", p}, {"fnv1a64", file_digest(p)}});
    auto& out = m["outputs"] = ojson::array();
    for (const auto& p : outputs) out.push_back({{"path", p}, {"fnv1a64", file_digest(p)}});
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    write_file((dir / "manifest.json").string(), m.dump(2) + "\n");
}

// Corpus directory layout: {train,dev,test}.jsonl, each optional.
struct LoadedCorpus {
    std::vector<MemeRecord> records;
    std::vector<std::string> files;
};

LoadedCorpus load_corpus_dir(const std::string& dir) {
    LoadedCorpus lc;
    std::size_t bad = 0;
    for (Split s : kAllSplits) {
        const fs::path p = fs::path(dir) / (std::string(to_string(s)) + ".jsonl");
        if (!fs::exists(p)) continue;
        LoadOptions opts;
        opts.default_split = s;
        auto res = load_jsonl(p.string(), opts);
        for (const auto& d : res.diagnostics)
            std::cerr << p.string() << ":" << d.line << ": " << to_string(d.kind) << " [" << d.field << "] "
                      << d.message << "\n";
        bad += res.diagnostics.size();
        lc.records.insert(lc.records.end(), res.records.begin(), res.records.end());
        lc.files.push_back(p.string());
    }
    if (lc.files.empty()) throw InvalidConfig("no train/dev/test .jsonl files in '" + dir + "'");
    if (bad) throw InvalidConfig(strprintf("%zu invalid corpus lines", bad));
    return lc;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InvalidConfig("cannot create output directory '" + dir + "': " + ec.message());
}

ToyPolicy load_policy(const std::string& path) {
    if (!fs::exists(path)) throw CheckpointError("checkpoint '" + path + "' does not exist");
    return load_checkpoint(path);
}

void write_failures(const fs::path& path, const std::vector<ItemFailure>& failures) {
    std::string out = "item_id,kind,message\n";
    for (const auto& f : failures) {
        std::string msg = f.message;
        for (char& c : msg)
            if (c == ',' || c == '\n' || c == '"') c = ' ';
        out += f.item_id + "," + f.kind + "," + msg + "\n";
    }
    write_file(path.string(), out);
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    CommonOptions common;
    std::string out_dir = "data";
    std::optional<std::size_t> n_train, n_dev, n_test, vocab_size;
    std::optional<double> ratio;
};

int cmd_synth(const SynthArgs& a) {
    std::vector<std::pair<std::string, std::string>> flags;
    if (a.n_train) flags.emplace_back("synth.n_train", std::to_string(*a.n_train));
    if (a.n_dev) flags.emplace_back("synth.n_dev", std::to_string(*a.n_dev));
    if (a.n_test) flags.emplace_back("synth.n_test", std::to_string(*a.n_test));
    if (a.vocab_size) flags.emplace_back("synth.vocab_size", std::to_string(*a.vocab_size));
    if (a.ratio) flags.emplace_back("synth.hateful_ratio", format_double(*a.ratio));
    const RunConfig cfg = load_config(a.common, flags);
    const auto records = generate_synthetic(cfg.synth);
    ensure_dir(a.out_dir);
    std::vector<std::string> outputs;
    for (Split s : kAllSplits) {
        const auto path = (fs::path(a.out_dir) / (std::string(to_string(s)) + ".jsonl")).string();
        save_jsonl(path, filter_split(records, s));
        outputs.push_back(path);
    }
    write_manifest(a.out_dir, "synth", cfg, {}, outputs);
    std::cout << corpus_stats(records).to_table();
    return kExitOk;
}

struct SftArgs {
    CommonOptions common;
    std::string data = "data";
    std::string out_dir = "runs/sft";
    std::string variant;
    std::string init;
};

int cmd_sft(const SftArgs& a) {
    std::vector<std::pair<std::string, std::string>> flags;
    if (!a.variant.empty()) flags.emplace_back("sft.variant", a.variant);
    const RunConfig cfg = load_config(a.common, flags);
    const auto corpus = load_corpus_dir(a.data);
    if (cfg.sft.variant == SftVariant::ClsFGExp_CoTD) {
        std::size_t missing = 0;
        for (const auto& r : corpus.records)
            if (r.split != Split::Test && (!r.cot_trace || trim(*r.cot_trace).empty())) ++missing;
        if (missing) {
            std::cerr << "MissingCotTrace: " << missing << " train/dev records lack a reasoning trace\n";
            return kExitUsage;
        }
    }
    std::vector<std::string> inputs = corpus.files;
    ToyPolicy initial = a.init.empty() ? ToyPolicy(vocabulary_from_corpus(corpus.records), cfg.feature_spec())
                                       : load_policy(a.init);
    if (!a.init.empty()) inputs.push_back(a.init);
    const auto result = run_sft(initial, corpus.records, cfg.sft, cfg.prompt_context());
    ensure_dir(a.out_dir);
    const auto ckpt = (fs::path(a.out_dir) / "checkpoint.json").string();
    const auto tel = (fs::path(a.out_dir) / "sft_telemetry.csv").string();
    save_checkpoint(ckpt, result.policy);
    write_file(tel, sft_telemetry_to_csv(result.telemetry));
    write_manifest(a.out_dir, "sft", cfg, inputs, {ckpt, tel}, {{"best_epoch", result.best_epoch}});
    for (const auto& r : result.telemetry)
        std::cout << strprintf("epoch %zu  steps %zu  train_loss %.4f  dev_loss %.4f\n", r.epoch, r.steps,
                               r.train_loss, r.dev_loss);
    std::cout << "selected epoch " << result.best_epoch << " -> " << ckpt << "\n";
    return kExitOk;
}

struct GrpoArgs {
    CommonOptions common;
    std::string data = "data";
    std::string out_dir = "runs/grpo";
    std::string init;
    bool cold_start = false;
    bool resume = false;
    std::size_t stop_after = 0;
    std::string variant;
};

int cmd_grpo(const GrpoArgs& a) {
    std::vector<std::pair<std::string, std::string>> flags;
    if (!a.variant.empty()) flags.emplace_back("sft.variant", a.variant);
    const RunConfig cfg = load_config(a.common, flags);
    if (a.init.empty() == !a.cold_start) throw InvalidConfig("grpo needs exactly one of --init CKPT or --cold-start");
    const auto corpus = load_corpus_dir(a.data);
    std::vector<std::string> inputs = corpus.files;
    ToyPolicy initial = a.cold_start
                            ? ToyPolicy(vocabulary_from_corpus(corpus.records), cfg.feature_spec(),
                                        {})
                            : load_policy(a.init);
    if (a.cold_start) {
        initial.set_assistant_prefix(
            sft_assistant_prefix(cfg.sft.variant, cfg.sft.mask_think_tokens, initial.vocab()));
    } else {
        inputs.push_back(a.init);
    }

    ensure_dir(a.out_dir);
    const fs::path dir(a.out_dir);
    const auto state_path = (dir / "state.json").string();
    const auto tel_path = (dir / "telemetry.csv").string();
    GrpoRunOptions opts;
    if (a.resume) {
        if (!fs::exists(state_path)) throw CheckpointError("--resume: no state.json in '" + a.out_dir + "'");
        opts.resume = grpo_state_from_json(read_file(state_path));
        std::cerr << "resuming at step " << opts.resume->next_step << "\n";
    }
    // Telemetry on disk always restarts from what the saved state knows about.
    write_file(tel_path, telemetry_to_csv(opts.resume ? opts.resume->telemetry : std::vector<TelemetryRecord>{}));

    std::unique_ptr<std::FILE, int (*)(std::FILE*)> tel_file(std::fopen(tel_path.c_str(), "a"), &std::fclose);
    if (!tel_file) throw InvalidConfig("cannot open " + tel_path);
    CollapseMonitor monitor(cfg.collapse_fraction, cfg.collapse_window);
    bool collapse_reported = false;
    if (opts.resume)
        for (const auto& r : opts.resume->telemetry) monitor.observe(r.mean_think_len);
    opts.stop_after_steps = a.stop_after;
    opts.on_step = [&](const TelemetryRecord& r) {
        const std::string row = telemetry_csv_row(r) + "\n";
        std::fwrite(row.data(), 1, row.size(), tel_file.get());
        std::fflush(tel_file.get());
        if (monitor.observe(r.mean_think_len) && !collapse_reported) {
            collapse_reported = true;
            std::cerr << strprintf("warning: think-segment collapse at step %zu (moving average %.3f, baseline %.3f)\n",
                                   r.step, monitor.current(), monitor.baseline());
        }
    };
    opts.on_state = [&](const GrpoState& s) { write_file(state_path, grpo_state_to_json(s)); };

    const auto result = run_grpo(initial, corpus.records, cfg.grpo, cfg.prompt_context(), opts);
    tel_file.reset();
    write_file(tel_path, telemetry_to_csv(result.telemetry));
    write_file(state_path, grpo_state_to_json(result.state));
    const auto ckpt = (dir / "checkpoint.json").string();
    const auto final_ckpt = (dir / "final_checkpoint.json").string();
    const auto dev_path = (dir / "dev_evals.csv").string();
    save_checkpoint(ckpt, result.policy);
    save_checkpoint(final_ckpt, result.final_policy);
    std::string dev_csv = "step,mean_reward,accuracy\n";
    for (const auto& d : result.dev_evals)
        dev_csv += strprintf("%zu,", d.step) + format_double(d.mean_reward) + "," + format_double(d.accuracy) + "\n";
    write_file(dev_path, dev_csv);
    write_manifest(a.out_dir, "grpo", cfg, inputs, {ckpt, final_ckpt, tel_path, dev_path},
                   {{"init", a.cold_start ? "cold-start" : a.init},
                    {"best_step", result.best_step},
                    {"completed", result.completed},
                    {"collapse_flagged", monitor.collapsed()}});
    if (!result.dev_evals.empty()) {
        const auto& last = result.dev_evals.back();
        std::cout << strprintf("steps %zu  best step %zu  last dev reward %.4f  last dev accuracy %.4f\n",
                               result.telemetry.size(), result.best_step, last.mean_reward, last.accuracy);
    }
    if (!result.completed) std::cout << "stopped early; continue with --resume\n";
    return kExitOk;
}

struct EvalArgs {
    CommonOptions common;
    std::string data = "data";
    std::string checkpoint;
    std::string split = "test";
    std::string out_dir = "runs/eval";
    std::optional<std::size_t> best_of;
    std::string variant;
};

int cmd_eval(const EvalArgs& a) {
    std::vector<std::pair<std::string, std::string>> flags;
    if (a.best_of) flags.emplace_back("eval.best_of", std::to_string(*a.best_of));
    if (!a.variant.empty()) flags.emplace_back("sft.variant", a.variant);
    const RunConfig cfg = load_config(a.common, flags);
    const auto split = parse_split(a.split);
    if (!split) throw InvalidConfig("unknown split '" + a.split + "'");
    const auto corpus = load_corpus_dir(a.data);
    const auto records = filter_split(corpus.records, *split);
    if (records.empty()) throw EmptySplit("split '" + a.split + "' has no records");
    const ToyPolicy policy = load_policy(a.checkpoint);

    EvalOptions opts;
    opts.best_of = cfg.eval_best_of;
    opts.decode = cfg.grpo.decode;
    opts.reward = cfg.grpo.reward;
    opts.prompt = cfg.prompt_context();
    auto report = evaluate(policy, records, opts);
    report.split = a.split;

    ensure_dir(a.out_dir);
    const auto json_path = (fs::path(a.out_dir) / "report.json").string();
    const auto csv_path = (fs::path(a.out_dir) / "report.csv").string();
    write_file(json_path, eval_report_to_json(report));
    write_file(csv_path, std::string(kEvalCsvHeader) + "\n" + eval_report_csv_row(report) + "\n");
    auto inputs = corpus.files;
    inputs.push_back(a.checkpoint);
    write_manifest(a.out_dir, "eval", cfg, inputs, {json_path, csv_path});
    const auto& c = report.classification;
    std::cout << strprintf("%s: n=%zu best_of=%zu acc=%.4f w-f1=%.4f m-f1=%.4f meteor=%.4f parse_failures=%zu\n",
                           a.split.c_str(), report.records, report.best_of, c.accuracy, c.weighted_f1, c.macro_f1,
                           report.mean_meteor, report.parse_failures);
    return kExitOk;
}

struct DistillArgs {
    CommonOptions common;
    std::string data = "data";
    std::string out_dir = "data_cot";
    bool mock = false;
};

int cmd_distill(const DistillArgs& a) {
    const RunConfig cfg = load_config(a.common);
    auto corpus = load_corpus_dir(a.data);
    std::unique_ptr<ChatClient> client;
    if (a.mock)
        client = std::make_unique<MockTeacherClient>(cfg.seed, cfg.feature_spec().watch_tokens);
    else
        client = std::make_unique<HttpChatClient>(cfg.modelsvc);
    const PromptContext ctx = cfg.prompt_context();
    const auto rep = distill_corpus(*client, corpus.records, ctx.guidelines, cfg.modelsvc.retry,
                                    a.mock ? 1 : cfg.modelsvc.max_concurrency);

    ensure_dir(a.out_dir);
    std::vector<std::string> outputs;
    for (Split s : kAllSplits) {
        const auto part = filter_split(corpus.records, s);
        if (part.empty()) continue;
        const auto path = (fs::path(a.out_dir) / (std::string(to_string(s)) + ".jsonl")).string();
        save_jsonl(path, part);
        outputs.push_back(path);
    }
    const auto fail_path = (fs::path(a.out_dir) / "distill_failures.csv").string();
    write_failures(fail_path, rep.failures);
    outputs.push_back(fail_path);
    std::size_t leakage = 0, service = 0;
    for (const auto& f : rep.failures) {
        leakage += f.kind == "LeakageDetected";
        service += f.kind == "ServiceUnavailable";
    }
    write_manifest(a.out_dir, "distill", cfg, corpus.files, outputs,
                   {{"mock", a.mock}, {"succeeded", rep.succeeded}, {"retries", rep.retries},
                    {"failures", rep.failures.size()}, {"leakage_failures", leakage}});
    std::cout << strprintf("distilled %zu traces, %zu failures (%zu leakage), %zu retries\n", rep.succeeded,
                           rep.failures.size(), leakage, rep.retries);
    for (const auto& f : rep.failures) std::cerr << "failed " << f.item_id << ": " << f.kind << ": " << f.message << "\n";
    return service ? kExitService : kExitOk;
}

struct JudgeArgs {
    CommonOptions common;
    std::string data = "data";
    std::string split = "test";
    std::string predictions;
    std::string out_dir = "runs/judge";
    bool mock = false;
    std::size_t judges = 2;
    bool distinct_seeds = false;
    std::vector<std::string> endpoints;
};

int cmd_judge(const JudgeArgs& a) {
    const RunConfig cfg = load_config(a.common);
    const auto split = parse_split(a.split);
    if (!split) throw InvalidConfig("unknown split '" + a.split + "'");
    const auto corpus = load_corpus_dir(a.data);
    auto records = filter_split(corpus.records, *split);
    std::vector<std::string> inputs = corpus.files;

    std::vector<std::string> explanations;
    if (a.predictions.empty()) {
        for (const auto& r : records) explanations.push_back(r.gold_explanation);
    } else {
        const auto j = nlohmann::json::parse(read_file(a.predictions), nullptr, false);
        if (j.is_discarded() || !j.contains("predictions")) throw InvalidConfig("predictions file is not an eval report");
        std::map<std::string, std::string> by_id;
        for (const auto& p : j["predictions"])
            by_id[p.at("id").get<std::string>()] = extract_fields(p.at("output").get<std::string>()).explanation.value_or("");
        std::vector<MemeRecord> kept;
        for (const auto& r : records) {
            const auto it = by_id.find(r.id);
            if (it == by_id.end() || trim(it->second).empty()) {
                std::cerr << "skipping " << r.id << ": no explanation to judge\n";
                continue;
            }
            kept.push_back(r);
            explanations.push_back(it->second);
        }
        records = std::move(kept);
        inputs.push_back(a.predictions);
    }

    std::vector<std::unique_ptr<ChatClient>> clients;
    std::vector<NamedJudge> judges;
    if (a.mock) {
        if (a.judges < 2) throw InsufficientJudges("--judges must be at least 2");
        for (std::size_t i = 0; i < a.judges; ++i) {
            clients.push_back(std::make_unique<MockJudgeClient>(a.distinct_seeds ? cfg.seed + i : cfg.seed));
            judges.push_back({strprintf("mock-%zu", i + 1), clients.back().get()});
        }
    } else {
        if (a.endpoints.size() < 2) throw InsufficientJudges("give at least two --endpoint judges (or --mock)");
        for (std::size_t i = 0; i < a.endpoints.size(); ++i) {
            ServiceClientConfig sc = cfg.modelsvc;
            sc.endpoint = a.endpoints[i];
            clients.push_back(std::make_unique<HttpChatClient>(sc));
            judges.push_back({strprintf("judge-%zu", i + 1), clients.back().get()});
        }
    }

    const auto rep = judge_corpus(judges, records, explanations, cfg.rubric_version, cfg.modelsvc.retry,
                                  a.mock ? 1 : cfg.modelsvc.max_concurrency);
    ensure_dir(a.out_dir);
    const fs::path dir(a.out_dir);
    const auto ratings_path = (dir / "ratings.csv").string();
    const auto fail_path = (dir / "judge_failures.csv").string();
    write_file(ratings_path, ratings_to_csv(rep.scores));
    write_failures(fail_path, rep.failures);
    std::vector<std::string> outputs = {ratings_path, fail_path};
    for (const auto& f : rep.failures) std::cerr << "failed " << f.item_id << ": " << f.kind << ": " << f.message << "\n";

    ojson extra = {{"mock", a.mock}, {"judges", judges.size()}, {"rubric_version", cfg.rubric_version},
                   {"failures", rep.failures.size()}};
    if (rep.failures.empty() && !records.empty()) {
        const auto agg = aggregate_judgments(rep.scores);
        const auto table_path = (dir / "agreement.txt").string();
        write_file(table_path, agg.to_table());
        outputs.push_back(table_path);
        std::cout << agg.to_table();
    }
    write_manifest(a.out_dir, "judge", cfg, inputs, outputs, extra);
    if (!rep.failures.empty()) {
        std::cerr << rep.failures.size() << " judgments failed; see " << fail_path << "\n";
        return kExitService;
    }
    return kExitOk;
}

struct PlotArgs {
    CommonOptions common;
    std::string telemetry;
    std::string out = "reward_length.svg";
    std::optional<std::size_t> window;
};

int cmd_plot(const PlotArgs& a) {
    std::vector<std::pair<std::string, std::string>> flags;
    if (a.window) flags.emplace_back("plot.window", std::to_string(*a.window));
    const RunConfig cfg = load_config(a.common, flags);
    if (!fs::exists(a.telemetry)) throw InvalidConfig("telemetry file '" + a.telemetry + "' does not exist");
    const auto rows = telemetry_from_csv(read_file(a.telemetry));
    PlotOptions opts;
    opts.window = cfg.plot_window;
    const auto res = plot_telemetry(rows, opts);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    write_file(a.out, res.svg);
    std::cout << "wrote " << a.out << " (window " << res.window << ")\n";
    return kExitOk;
}

struct InferArgs {
    CommonOptions common;
    std::string checkpoint;
    std::string text;
    std::string image = "img/input.png";
    std::optional<std::size_t> best_of;
    std::string variant;
};

int cmd_infer(const InferArgs& a) {
    std::vector<std::pair<std::string, std::string>> flags;
    if (a.best_of) flags.emplace_back("eval.best_of", std::to_string(*a.best_of));
    if (!a.variant.empty()) flags.emplace_back("sft.variant", a.variant);
    const RunConfig cfg = load_config(a.common, flags);
    const ToyPolicy policy = load_policy(a.checkpoint);
    MemeRecord r;
    r.id = "input";
    r.image_ref = a.image;
    r.ocr_text = a.text;
    std::mt19937_64 rng(cfg.grpo.decode.rng_seed);
    const auto res = infer_best_of_n(policy, build_prompt(r, cfg.prompt_context()), cfg.eval_best_of,
                                     cfg.grpo.decode, rng, cfg.grpo.reward);
    std::cout << res.candidates[res.selected] << "\n";
    if (const auto label = predicted_label(res))
        std::cout << "label: " << label_name(*label) << "\n";
    else
        std::cout << "label: unparseable\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"memerl: structured reasoning rewards and group-relative policy optimization on meme corpora"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(version_string()));

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "write a synthetic trigger-word corpus");
    add_common(c_synth, synth.common);
    c_synth->add_option("-o,--out-dir", synth.out_dir, "output directory");
    c_synth->add_option("--n-train", synth.n_train);
    c_synth->add_option("--n-dev", synth.n_dev);
    c_synth->add_option("--n-test", synth.n_test);
    c_synth->add_option("--vocab-size", synth.vocab_size);
    c_synth->add_option("--hateful-ratio", synth.ratio);

    SftArgs sft;
    auto* c_sft = app.add_subcommand("sft", "supervised warm-up");
    add_common(c_sft, sft.common);
    c_sft->add_option("-d,--data", sft.data, "corpus directory");
    c_sft->add_option("-o,--out-dir", sft.out_dir, "output directory");
    c_sft->add_option("--variant", sft.variant, "cls_exp_nocot | cls_fg_exp_nocot | cls_fg_exp_cotd");
    c_sft->add_option("--init", sft.init, "start from this checkpoint instead of a fresh policy");

    GrpoArgs grpo;
    auto* c_grpo = app.add_subcommand("grpo", "group-relative policy optimization");
    add_common(c_grpo, grpo.common);
    c_grpo->add_option("-d,--data", grpo.data, "corpus directory");
    c_grpo->add_option("-o,--out-dir", grpo.out_dir, "output directory");
    c_grpo->add_option("--init", grpo.init, "initial checkpoint (also the KL reference)");
    c_grpo->add_flag("--cold-start", grpo.cold_start, "start from a fresh uniform policy");
    c_grpo->add_flag("--resume", grpo.resume, "continue from state.json in the output directory");
    c_grpo->add_option("--stop-after", grpo.stop_after, "stop after this many steps (resumable)");
    c_grpo->add_option("--variant", grpo.variant, "prompt/prefix variant of the initial checkpoint");

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "classification and explanation metrics on a split");
    add_common(c_eval, ev.common);
    c_eval->add_option("-d,--data", ev.data, "corpus directory");
    c_eval->add_option("--checkpoint", ev.checkpoint, "policy checkpoint")->required();
    c_eval->add_option("--split", ev.split, "train | dev | test");
    c_eval->add_option("-o,--out-dir", ev.out_dir, "output directory");
    c_eval->add_option("--best-of", ev.best_of, "candidates per record");
    c_eval->add_option("--variant", ev.variant, "prompt variant of the checkpoint");

    DistillArgs distill;
    auto* c_distill = app.add_subcommand("distill", "add teacher reasoning traces to a corpus");
    add_common(c_distill, distill.common);
    c_distill->add_option("-d,--data", distill.data, "corpus directory");
    c_distill->add_option("-o,--out-dir", distill.out_dir, "output corpus directory");
    c_distill->add_flag("--mock", distill.mock, "use the offline mock teacher");

    JudgeArgs judge;
    auto* c_judge = app.add_subcommand("judge", "rate explanations with judge models");
    add_common(c_judge, judge.common);
    c_judge->add_option("-d,--data", judge.data, "corpus directory");
    c_judge->add_option("--split", judge.split, "train | dev | test");
    c_judge->add_option("--predictions", judge.predictions, "eval report.json whose explanations are judged");
    c_judge->add_option("-o,--out-dir", judge.out_dir, "output directory");
    c_judge->add_flag("--mock", judge.mock, "use offline mock judges");
    c_judge->add_option("--judges", judge.judges, "number of mock judges");
    c_judge->add_flag("--distinct-seeds", judge.distinct_seeds, "give each mock judge its own seed");
    c_judge->add_option("--endpoint", judge.endpoints, "judge service address (one per judge)");

    PlotArgs plot;
    auto* c_plot = app.add_subcommand("plot", "reward/length chart from a telemetry CSV");
    add_common(c_plot, plot.common);
    c_plot->add_option("telemetry", plot.telemetry, "telemetry CSV")->required();
    c_plot->add_option("-o,--out", plot.out, "output SVG");
    c_plot->add_option("--window", plot.window, "smoothing window");

    InferArgs infer;
    auto* c_infer = app.add_subcommand("infer", "label and explain one meme text");
    add_common(c_infer, infer.common);
    c_infer->add_option("--checkpoint", infer.checkpoint, "policy checkpoint")->required();
    c_infer->add_option("--text", infer.text, "meme text")->required();
    c_infer->add_option("--image", infer.image, "image reference");
    c_infer->add_option("--best-of", infer.best_of, "candidates to sample");
    c_infer->add_option("--variant", infer.variant, "prompt variant of the checkpoint");

    auto* c_schema = app.add_subcommand("schema", "print the config key schema as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*c_synth) return cmd_synth(synth);
        if (*c_sft) return cmd_sft(sft);
        if (*c_grpo) return cmd_grpo(grpo);
        if (*c_eval) return cmd_eval(ev);
        if (*c_distill) return cmd_distill(distill);
        if (*c_judge) return cmd_judge(judge);
        if (*c_plot) return cmd_plot(plot);
        if (*c_infer) return cmd_infer(infer);
        if (*c_schema) {
            std::cout << config_schema_json();
            return kExitOk;
        }
    } catch (const ServiceUnavailable& e) {
        std::cerr << "service error: " << e.what() << "\n";
        return kExitService;
    } catch (const MissingCotTrace& e) {
        std::cerr << "MissingCotTrace: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
