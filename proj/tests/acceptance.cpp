// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <sys/wait.h>

#include "memerl/config.hpp"
#include "memerl/inference.hpp"
#include "memerl/metrics.hpp"
#include "memerl/rewards.hpp"
#include "memerl/telemetry.hpp"
#include "memerl/trainer.hpp"
#include "memerl/util.hpp"
#include "checks.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace memerl;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    // Records a failed condition; the first failure message wins the detail line.
    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail = what;
        pass = pass && ok;
    }
};

struct Criterion {
    int id;
    std::string name;
    double limit_seconds;
    std::function<Outcome()> run;
};

// ---------------------------------------------------------------------------

Outcome reward_fidelity() {
    Outcome o;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const RewardBreakdown b{u(rng), u(rng), u(rng), u(rng), 0.0};
        const double want = 0.5 * b.r_fmt + 0.4 * b.r_lbl + 0.05 * b.r_len + 0.05 * b.r_met;
        worst = std::max(worst, std::abs(weighted_total(b, RewardWeights{}) - want));
    }
    o.require(worst <= 1e-12, strprintf("weighted-sum error %.3g", worst));
    o.require(reward_length_from_count(100) == 1.0, "R_len(100) != 1");
    o.require(std::abs(reward_length_from_count(120) - std::exp(-0.5)) <= 1e-9, "R_len(120) != exp(-0.5)");
    for (std::size_t d = 0; d <= 100; ++d)
        o.require(reward_length_from_count(100 + d) == reward_length_from_count(100 - d),
                  strprintf("R_len asymmetric at distance %zu", d));
    if (o.pass) o.detail = strprintf("max identity error %.2g over 10000 breakdowns", worst);
    return o;
}

Outcome meteor_oracle() {
    Outcome o;
    const std::string ten = "one two three four five six seven eight nine ten";
    o.require(std::abs(meteor(ten, ten) - 0.9995) <= 1e-6, strprintf("identical: %.9f", meteor(ten, ten)));
    o.require(std::abs(meteor("b a", "a b") - 0.5) <= 1e-9, strprintf("swapped: %.12f", meteor("b a", "a b")));
    o.require(meteor("a b c", "d e f") == 0.0, "disjoint sentences score above zero");
    std::size_t pairs = 0, mismatches = 0;
    oracle::for_each_pair_up_to_renaming(6, 5, [&](const auto& cand, const auto& ref) {
        const auto want = oracle::meteor(cand, ref);
        const auto got = meteor_align(cand, ref);
        const double score = meteor_from_counts(got.matches, got.chunks, cand.size(), ref.size());
        if (got.matches != want.matches || got.chunks != want.chunks || std::abs(score - want.score) > 1e-12)
            ++mismatches;
        ++pairs;
    });
    o.require(mismatches == 0, strprintf("%zu of %zu pairs disagree with the brute-force oracle", mismatches, pairs));
    if (o.pass) o.detail = strprintf("%zu pairs (lengths 1..6, 5 symbols, all equality patterns) agree", pairs);
    return o;
}

Outcome advantage_contract() {
    Outcome o;
    const std::vector<double> r = {1.0, 0.5, 0.0};
    const auto a = compute_advantages(r, 0.0);
    o.require(std::abs(a[0] - 1.2247) < 1e-4 && std::abs(a[1]) < 1e-4 && std::abs(a[2] + 1.2247) < 1e-4,
              strprintf("got (%.6f, %.6f, %.6f)", a[0], a[1], a[2]));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> xs(8), shifted(8);
        const double c = static_cast<double>(static_cast<int>(u(rng) * 8)) / 4.0;  // exactly representable shift
        for (std::size_t k = 0; k < 8; ++k) {
            xs[k] = static_cast<double>(static_cast<int>(u(rng) * 64)) / 64.0;
            shifted[k] = xs[k] + c;
        }
        o.require(compute_advantages(xs, 1e-8) == compute_advantages(shifted, 1e-8), "shift changed the advantages");
    }
    const std::vector<double> same(6, 0.37);
    for (double x : compute_advantages(same, 1e-8)) o.require(x == 0.0, "equal rewards gave a nonzero advantage");
    if (o.pass) o.detail = strprintf("(%.4f, %.4f, %.4f)", a[0], a[1], a[2]);
    return o;
}

Outcome gradient_checks() {
    Outcome o;
    double lp = 0, sft = 0, grpo = 0;
    int grpo_cases = 0;
    for (std::uint64_t c = 0; c < 100; ++c) {
        lp = std::max(lp, checks::logprob_gradient_case(1000 + c));
        sft = std::max(sft, checks::sft_gradient_case(2000 + c));
    }
    for (std::uint64_t c = 0; grpo_cases < 100 && c < 1000; ++c) {
        if (const auto e = checks::grpo_gradient_case(3000 + c)) {
            grpo = std::max(grpo, *e);
            ++grpo_cases;
        }
    }
    o.require(lp < 1e-4, strprintf("log-prob max relative error %.3g", lp));
    o.require(sft < 1e-4, strprintf("SFT max relative error %.3g", sft));
    o.require(grpo_cases == 100, strprintf("only %d usable GRPO cases", grpo_cases));
    o.require(grpo < 1e-4, strprintf("GRPO max relative error %.3g", grpo));
    o.detail = strprintf("max rel. error: log-prob %.1e, SFT %.1e, GRPO %.1e (100 cases each)", lp, sft, grpo) +
               (o.pass ? "" : "; " + o.detail);
    return o;
}

Outcome clipping_and_kl() {
    Outcome o;
    for (std::uint64_t c = 0; c < 50; ++c) {
        const auto probe = checks::clipped_regime_case(4000 + c);
        o.require(probe.clip_frac == 1.0, "constructed states were not all clipped");
        o.require(probe.max_abs_grad == 0.0, strprintf("clipped gradient %.3g", probe.max_abs_grad));
        o.require(probe.flipped_max_abs_grad > 0.0, "unclipped states produced no gradient");
    }
    std::mt19937_64 rng(5);
    for (std::uint64_t c = 0; c < 1000; ++c) {
        const auto p = testing_support::random_policy(5000 + c, 1.0);
        const auto q = testing_support::random_policy(9000 + c, 1.0);
        const auto prompt = p.encode_prompt(c % 2 ? "zorb" : "");
        const auto tokens = testing_support::random_tokens(rng, p.vocab().size(), 1 + rng() % 8);
        o.require(accumulate_kl(p, p, prompt, tokens, 0, 0.0, nullptr) == 0.0, "KL(theta, theta) != 0");
        o.require(accumulate_kl(p, q, prompt, tokens, 0, 0.0, nullptr) >= 0.0, "negative KL");
    }
    GrpoConfig cfg = checks::gradient_check_config();
    cfg.decode.max_tokens = 24;
    std::size_t ratios = 0;
    for (std::uint64_t c = 0; c < 20; ++c) {
        const auto p = testing_support::random_policy(6000 + c, 0.7, {0, 1});
        const auto g = sample_group(p, checks::toy_record(Label::Hateful, "a"), p.encode_prompt("zorb"), cfg, c);
        for (std::size_t k = 0; k < g.trajectories.size(); ++k) {
            const auto& tr = g.trajectories[k];
            const auto lp = logprobs(*snapshot(p), g.prompt, tr.tokens);
            for (std::size_t t = tr.prefix_len; t < tr.tokens.size(); ++t, ++ratios)
                o.require(std::exp(lp[t] - g.old_logprobs[k][t - tr.prefix_len]) == 1.0, "ratio != 1 after snapshot");
        }
    }
    if (o.pass) o.detail = strprintf("50 clipped groups, 1000 KL pairs, %zu ratios checked", ratios);
    return o;
}

// The synthetic task used by the learning criteria: default synth config under `seed`.
struct Pipeline {
    SynthConfig synth;
    std::vector<MemeRecord> corpus;
    ToyPolicy fresh;
    SftConfig sft;
    GrpoConfig grpo;
};

Pipeline pipeline(std::uint64_t seed) {
    RunConfig rc;
    rc.seed = seed;
    rc.apply_seed();
    return {rc.synth, generate_synthetic(rc.synth), ToyPolicy(synthetic_vocabulary(rc.synth), rc.feature_spec()),
            rc.sft, rc.grpo};
}

double dev_accuracy(const ToyPolicy& policy, const Pipeline& p) {
    EvalOptions opts;
    opts.decode = p.grpo.decode;
    return evaluate(policy, filter_split(p.corpus, Split::Dev), opts).classification.accuracy;
}

Outcome end_to_end_learning() {
    Outcome o;
    const auto p = pipeline(42);
    const auto stats = corpus_stats(p.corpus);
    o.require(stats.per_split.at(Split::Train).total() == 200 && stats.per_split.at(Split::Dev).total() == 50 &&
                  synthetic_vocabulary(p.synth).size() == 64,
              "corpus shape differs from 200 train / 50 dev / vocab 64");
    o.require(p.sft.epochs == 3 && p.grpo.group_size == 8 && p.grpo.kl_beta == 0.04 && p.grpo.clip_epsilon == 0.2,
              "defaults drifted from SFT 3 epochs, K=8, beta=0.04, eps=0.2");
    const auto sft = run_sft(p.fresh, p.corpus, p.sft);
    const auto res = run_grpo(sft.policy, p.corpus, p.grpo);
    std::vector<double> reward;
    for (const auto& t : res.telemetry) reward.push_back(t.mean_reward);
    // one block per pass over the training prompts, so every block scores the same prompt set
    const std::size_t w = stats.per_split.at(Split::Train).total() / p.grpo.batch_size;
    const auto blocks = block_means(reward, w);
    o.require(blocks.size() >= 2 && reward.size() % w == 0, "run does not cover at least two whole passes");
    double worst_drop = 0.0;
    for (std::size_t i = 1; i < blocks.size(); ++i) worst_drop = std::max(worst_drop, blocks[i - 1] - blocks[i]);
    const double acc = dev_accuracy(res.final_policy, p);
    std::string curve;
    for (double b : blocks) curve += strprintf(" %.5f", b);
    o.require(worst_drop <= 0.0, strprintf("smoothed reward dropped by %.5f; blocks%s", worst_drop, curve.c_str()));
    o.require(acc >= 0.95, strprintf("final dev accuracy %.3f", acc));
    o.detail = strprintf("reward %.5f -> %.5f (window %zu, worst drop %.5f), final dev accuracy %.3f", blocks.front(),
                         blocks.back(), w, worst_drop, acc) +
               (o.pass ? "" : "; " + o.detail);
    return o;
}

Outcome warm_start_ordering() {
    Outcome o;
    std::string detail;
    for (std::uint64_t seed : {42, 43, 44}) {
        const auto p = pipeline(seed);
        const auto warm = run_grpo(run_sft(p.fresh, p.corpus, p.sft).policy, p.corpus, p.grpo);
        const auto cold = run_grpo(p.fresh, p.corpus, p.grpo);
        const double wa = dev_accuracy(warm.final_policy, p), ca = dev_accuracy(cold.final_policy, p);
        o.require(ca <= wa, strprintf("seed %llu: cold %.3f > warm %.3f", static_cast<unsigned long long>(seed), ca, wa));
        detail += strprintf("%sseed %llu cold %.2f / warm %.2f", detail.empty() ? "" : ", ",
                            static_cast<unsigned long long>(seed), ca, wa);
    }
    o.detail = detail + (o.pass ? "" : "; " + o.detail);
    return o;
}

Outcome agreement_index() {
    Outcome o;
    o.require(agreement_rwg(RatingsGrid{{4, 4, 4}}) == 1.0, "unanimous ratings != 1");
    o.require(std::abs(agreement_rwg(RatingsGrid{{5, 4}}) - 0.9375) <= 1e-12, "{5,4} != 0.9375");
    o.require(agreement_rwg(RatingsGrid{{1, 5}}) == 0.0, "{1,5} != 0");
    if (o.pass) o.detail = "1.0 / 0.9375 / 0.0";
    return o;
}

Outcome parser_suite() {
    Outcome o;
    std::mt19937_64 rng(9);
    for (int i = 0; i < 1000; ++i) {
        const auto out = checks::random_output(rng);
        const auto parsed = parse(serialize(out));
        o.require(std::holds_alternative<StructuredOutput>(parsed) && std::get<StructuredOutput>(parsed) == out,
                  strprintf("round trip %d failed", i));
    }
    for (const auto& f : checks::malformed_fixtures()) {
        o.require(check_format(f.text) == f.expected, std::string("fixture ") + f.name + " flags differ");
        o.require(reward_format(f.text) == 0.0, std::string("fixture ") + f.name + " earns format reward");
    }
    if (o.pass) o.detail = strprintf("1000 round trips, %zu malformed fixtures", checks::malformed_fixtures().size());
    return o;
}

Outcome classification_oracle() {
    Outcome o;
    const auto r = classification_report({Label::Hateful, Label::Hateful, Label::Hateful, Label::NonHateful},
                                         {Label::Hateful, Label::Hateful, Label::NonHateful, Label::NonHateful});
    o.require(r.accuracy == 0.75, strprintf("accuracy %.4f", r.accuracy));
    o.require(std::abs(r.macro_f1 - 0.7333) <= 1e-4, strprintf("macro F1 %.6f", r.macro_f1));
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 60;
        std::vector<Label> gold(n);
        std::vector<std::optional<Label>> pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            gold[i] = rng() % 2 ? Label::Hateful : Label::NonHateful;
            const auto v = rng() % 5;
            if (v) pred[i] = v % 2 ? Label::Hateful : Label::NonHateful;
        }
        const auto got = classification_report(pred, gold);
        const auto want = oracle::classification(pred, gold);
        o.require(std::abs(got.accuracy - want.accuracy) <= 1e-12 && std::abs(got.macro_f1 - want.macro_f1) <= 1e-12 &&
                      std::abs(got.weighted_f1 - want.weighted_f1) <= 1e-12,
                  strprintf("prediction set %d disagrees with the oracle", trial));
    }
    if (o.pass) o.detail = strprintf("hand case 0.75 / %.4f; 100 random sets agree", r.macro_f1);
    return o;
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string(MEMERL_CLI) + " " + args + " >>" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome telemetry_and_collapse() {
    Outcome o;
    const auto dir = testing_support::temp_dir("acceptance_telemetry");
    const auto log = dir / "log";
    const std::string data = (dir / "data").string();
    o.require(run_cli("synth --n-train 24 --n-dev 8 --n-test 8 -o " + data, log) == 0, "synth failed");
    o.require(run_cli("grpo --cold-start --set grpo.steps=8 --set grpo.group_size=4 --set decode.max_tokens=32 -d " +
                          data + " -o " + (dir / "grpo").string(),
                      log) == 0,
              "grpo failed");
    const auto csv = (dir / "grpo" / "telemetry.csv").string();
    if (fs::exists(csv)) {
        const auto text = read_file(csv);
        o.require(text.substr(0, text.find('\n')) == kTelemetryHeader, "telemetry header differs");
        o.require(telemetry_from_csv(text).size() == 8, "telemetry does not have one row per step");
    } else {
        o.require(false, "no telemetry.csv");
    }

    CollapseMonitor monitor;
    bool fired = false;
    for (int i = 0; i < 100; ++i) fired = monitor.observe(40.0 * std::exp(-i / 15.0)) || fired;
    o.require(fired, "shrinking think length did not raise the collapse flag");
    CollapseMonitor steady;
    for (int i = 0; i < 100; ++i) o.require(!steady.observe(20.0 + (i % 3)), "steady think length raised the flag");

    o.require(run_cli("plot " + csv + " -o " + (dir / "a.svg").string(), log) == 0, "plot failed");
    o.require(run_cli("plot " + csv + " -o " + (dir / "b.svg").string(), log) == 0, "plot failed");
    if (fs::exists(dir / "a.svg") && fs::exists(dir / "b.svg")) {
        const auto a = read_file((dir / "a.svg").string());
        o.require(a == read_file((dir / "b.svg").string()), "plot output differs between runs");
        o.require(a.find("id=\"reward\"") != std::string::npos && a.find("id=\"length\"") != std::string::npos,
                  "plot lacks the reward and length series");
    }
    if (o.pass) o.detail = "exact header, collapse flag raised, identical SVG bytes";
    return o;
}

Outcome determinism() {
    Outcome o;
    const auto root = testing_support::temp_dir("acceptance_determinism");
    const auto log = root / "log";
    std::vector<std::vector<std::string>> outputs;
    for (const char* run : {"a", "b"}) {
        const auto d = root / run;
        const std::string data = (d / "data").string();
        o.require(run_cli("synth --seed 42 -o " + data, log) == 0, "synth failed");
        o.require(run_cli("sft --seed 42 -d " + data + " -o " + (d / "sft").string(), log) == 0, "sft failed");
        o.require(run_cli("grpo --seed 42 --init " + (d / "sft" / "checkpoint.json").string() + " -d " + data + " -o " +
                              (d / "grpo").string(),
                          log) == 0,
                  "grpo failed");
        o.require(run_cli("eval --seed 42 --best-of 4 --checkpoint " + (d / "grpo" / "checkpoint.json").string() +
                              " --split test -d " + data + " -o " + (d / "eval").string(),
                          log) == 0,
                  "eval failed");
        std::vector<std::string> files;
        for (const auto& rel : {"sft/sft_telemetry.csv", "grpo/telemetry.csv", "grpo/dev_evals.csv",
                                "grpo/checkpoint.json", "eval/report.json", "eval/report.csv"}) {
            const auto p = d / rel;
            files.push_back(fs::exists(p) ? read_file(p.string()) : std::string("<missing ") + rel + ">");
        }
        outputs.push_back(files);
    }
    o.require(outputs[0] == outputs[1], "pipeline outputs differ between the two runs");
    if (o.pass) o.detail = strprintf("6 artifacts byte-identical (telemetry %zu bytes)", outputs[0][1].size());
    return o;
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "reward formula fidelity", 1, reward_fidelity},
        {2, "METEOR hand values and brute-force oracle", 30, meteor_oracle},
        {3, "advantage contract", 1, advantage_contract},
        {4, "gradient checks vs central differences", 120, gradient_checks},
        {5, "clipping and KL mechanics", 10, clipping_and_kl},
        {6, "end-to-end GRPO learning", 300, end_to_end_learning},
        {7, "warm-start ordering across 3 seeds", 900, warm_start_ordering},
        {8, "agreement index", 1, agreement_index},
        {9, "parser and format suite", 5, parser_suite},
        {10, "classification metrics oracle", 5, classification_oracle},
        {11, "telemetry, collapse monitor, plot", 10, telemetry_and_collapse},
        {12, "pipeline determinism", 720, determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.limit_seconds;
        const bool ok = o.pass && in_time;
        failed += !ok;
        std::printf("%s [%2d] %-44s %8.2fs (limit %gs)  %s%s\n", ok ? "PASS" : "FAIL", c.id, c.name.c_str(), secs,
                    c.limit_seconds, o.detail.c_str(), in_time ? "" : " [over time limit]");
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
