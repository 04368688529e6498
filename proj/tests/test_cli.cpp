#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include "json.hpp"
#include "memerl/corpus.hpp"
#include "memerl/telemetry.hpp"
#include "memerl/util.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace memerl;

namespace {

const std::string kCli = MEMERL_CLI;
const std::string kSmall = " --n-train 24 --n-dev 8 --n-test 8";
const std::string kFastGrpo = " --set grpo.steps=6 --set grpo.eval_every=2 --set grpo.group_size=4 --set decode.max_tokens=32";

int run(const std::string& args, const fs::path& log) {
    const std::string cmd = kCli + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return read_file(p.string()); }

}  // namespace

TEST(Cli, SynthIsByteIdenticalAcrossRuns) {
    const auto dir = testing_support::temp_dir("cli_synth");
    ASSERT_EQ(run("synth -o " + (dir / "a").string(), dir / "log"), 0);
    ASSERT_EQ(run("synth -o " + (dir / "b").string(), dir / "log"), 0);
    for (const char* f : {"train.jsonl", "dev.jsonl", "test.jsonl"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    // manifests record output paths, so only the hash is compared
    const auto ma = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
    const auto mb = nlohmann::json::parse(slurp(dir / "b" / "manifest.json"));
    ASSERT_TRUE(ma.contains("config_hash"));
    EXPECT_EQ(ma["config_hash"], mb["config_hash"]);
    ASSERT_EQ(run("synth --seed 43 -o " + (dir / "c").string(), dir / "log"), 0);
    EXPECT_NE(slurp(dir / "a" / "train.jsonl"), slurp(dir / "c" / "train.jsonl"));
}

TEST(Cli, InvalidInputsExitWithUsageCode) {
    const auto dir = testing_support::temp_dir("cli_invalid");
    EXPECT_EQ(run("synth --hateful-ratio 1.5 -o " + (dir / "x").string(), dir / "log"), 2);
    EXPECT_NE(slurp(dir / "log").find("hateful_ratio"), std::string::npos);
    EXPECT_EQ(run("synth --set grpo.bogus=1 -o " + (dir / "x").string(), dir / "log"), 2);
    EXPECT_EQ(run("frobnicate", dir / "log"), 2);

    fs::create_directories(dir / "bad");
    write_file((dir / "bad" / "train.jsonl").string(), "{\"id\":\"a\"}\n");
    EXPECT_EQ(run("sft -d " + (dir / "bad").string() + " -o " + (dir / "s").string(), dir / "log"), 2);
    EXPECT_NE(slurp(dir / "log").find("train.jsonl:1: MissingField"), std::string::npos);
}

TEST(Cli, CotdWithoutTracesFailsBeforeTraining) {
    const auto dir = testing_support::temp_dir("cli_cotd");
    ASSERT_EQ(run("synth" + kSmall + " -o " + (dir / "data").string(), dir / "log"), 0);
    EXPECT_EQ(run("sft --variant cls_fg_exp_cotd -d " + (dir / "data").string() + " -o " + (dir / "sft").string(),
                  dir / "log"),
              2);
    EXPECT_NE(slurp(dir / "log").find("MissingCotTrace"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir / "sft" / "checkpoint.json"));

    ASSERT_EQ(run("distill --mock -d " + (dir / "data").string() + " -o " + (dir / "cot").string(), dir / "log"), 0);
    EXPECT_EQ(run("sft --variant cls_fg_exp_cotd --set sft.epochs=1 -d " + (dir / "cot").string() + " -o " +
                      (dir / "sft").string(),
                  dir / "log"),
              0)
        << slurp(dir / "log");
    EXPECT_TRUE(fs::exists(dir / "sft" / "checkpoint.json"));
}

TEST(Cli, GrpoResumeContinuesTheSameRun) {
    const auto dir = testing_support::temp_dir("cli_resume");
    const std::string data = (dir / "data").string();
    ASSERT_EQ(run("synth" + kSmall + " -o " + data, dir / "log"), 0);
    ASSERT_EQ(run("sft --set sft.epochs=1 -d " + data + " -o " + (dir / "sft").string(), dir / "log"), 0);
    const std::string init = " --init " + (dir / "sft" / "checkpoint.json").string();

    ASSERT_EQ(run("grpo" + kFastGrpo + init + " -d " + data + " -o " + (dir / "full").string(), dir / "log"), 0)
        << slurp(dir / "log");
    ASSERT_EQ(run("grpo" + kFastGrpo + init + " --stop-after 4 -d " + data + " -o " + (dir / "part").string(),
                  dir / "log"),
              0);
    ASSERT_EQ(run("grpo" + kFastGrpo + init + " --resume -d " + data + " -o " + (dir / "part").string(), dir / "log"),
              0)
        << slurp(dir / "log");
    EXPECT_EQ(slurp(dir / "full" / "telemetry.csv"), slurp(dir / "part" / "telemetry.csv"));
    EXPECT_EQ(slurp(dir / "full" / "final_checkpoint.json"), slurp(dir / "part" / "final_checkpoint.json"));
    EXPECT_EQ(telemetry_from_csv(slurp(dir / "full" / "telemetry.csv")).size(), 6u);

    EXPECT_EQ(run("grpo" + kFastGrpo + init + " --cold-start -d " + data + " -o " + (dir / "x").string(), dir / "log"), 2);
}

TEST(Cli, EvalPlotAndInfer) {
    const auto dir = testing_support::temp_dir("cli_eval");
    const std::string data = (dir / "data").string();
    ASSERT_EQ(run("synth" + kSmall + " -o " + data, dir / "log"), 0);
    ASSERT_EQ(run("sft --set sft.epochs=1 -d " + data + " -o " + (dir / "sft").string(), dir / "log"), 0);
    const std::string ckpt = (dir / "sft" / "checkpoint.json").string();
    ASSERT_EQ(run("eval --checkpoint " + ckpt + " --best-of 3 -d " + data + " -o " + (dir / "eval").string(),
                  dir / "log"),
              0);
    const auto csv = slurp(dir / "eval" / "report.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "split,records,best_of,accuracy,weighted_f1,macro_f1,mean_meteor,parse_failures,non_compliant");
    EXPECT_NE(slurp(dir / "eval" / "report.json").find("\"predictions\""), std::string::npos);

    ASSERT_EQ(run("grpo" + kFastGrpo + " --init " + ckpt + " -d " + data + " -o " + (dir / "grpo").string(),
                  dir / "log"),
              0);
    const auto tel = (dir / "grpo" / "telemetry.csv").string();
    ASSERT_EQ(run("plot " + tel + " -o " + (dir / "a.svg").string(), dir / "log"), 0);
    ASSERT_EQ(run("plot " + tel + " -o " + (dir / "b.svg").string(), dir / "log"), 0);
    EXPECT_EQ(slurp(dir / "a.svg"), slurp(dir / "b.svg"));
    EXPECT_EQ(run("plot " + (dir / "eval" / "report.csv").string() + " -o " + (dir / "c.svg").string(), dir / "log"), 2);

    EXPECT_EQ(run("infer --checkpoint " + ckpt + " --text \"w01 zorb w02\"", dir / "log"), 0);
    EXPECT_NE(slurp(dir / "log").find("label:"), std::string::npos);
}

TEST(Cli, UnreachableJudgesExitWithServiceCode) {
    const auto dir = testing_support::temp_dir("cli_judge");
    const std::string data = (dir / "data").string();
    ASSERT_EQ(run("synth --n-train 4 --n-dev 2 --n-test 2 --vocab-size 48 -o " + data, dir / "log"), 0);
    const int code = run("judge --set modelsvc.backoff_ms=1 --set modelsvc.timeout_ms=300 --endpoint http://127.0.0.1:1"
                         " --endpoint http://127.0.0.1:1 -d " + data + " -o " + (dir / "j").string(),
                         dir / "log");
    EXPECT_EQ(code, 3) << slurp(dir / "log");
    EXPECT_NE(slurp(dir / "j" / "judge_failures.csv").find("ServiceUnavailable"), std::string::npos);

    EXPECT_EQ(run("judge --mock --judges 3 -d " + data + " -o " + (dir / "m").string(), dir / "log"), 0);
    EXPECT_TRUE(fs::exists(dir / "m" / "agreement.txt"));
}

TEST(Cli, SchemaMatchesTheCommittedDocument) {
    const auto dir = testing_support::temp_dir("cli_schema");
    ASSERT_EQ(run("schema", dir / "out"), 0);
    EXPECT_EQ(slurp(dir / "out"), read_file(std::string(MEMERL_SOURCE_DIR) + "/docs/config_schema.json"));
}
