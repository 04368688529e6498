#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "memerl/corpus.hpp"
#include "memerl/modelsvc.hpp"
#include "memerl/policy.hpp"
#include "memerl/trainer.hpp"

namespace memerl {

/// Every tunable of a pipeline run. The global seed feeds every module seed.
struct RunConfig {
    std::uint64_t seed = 42;
    SynthConfig synth{};
    std::string prompt_template = "v1";
    std::string guidelines_file;  // empty = bundled v1 guidelines
    FeatureSpec policy{};         // empty watch list = the synthetic trigger words
    SftConfig sft{};
    GrpoConfig grpo{};
    double collapse_fraction = 0.5;
    std::size_t collapse_window = 10;
    ServiceClientConfig modelsvc{};
    std::string rubric_version = "v1";
    std::size_t plot_window = 0;  // 0 = scaled to the run length
    std::size_t eval_best_of = 1;

    /// Pushes `seed` into the per-module seeds.
    void apply_seed();
    /// Policy feature space with the default watch list filled in.
    FeatureSpec feature_spec() const;
    /// Prompt context implied by the template, guidelines file and SFT variant.
    PromptContext prompt_context() const;
};

enum class ConfigType { Integer, Number, Boolean, String, StringList };

std::string_view to_string(ConfigType t);

struct ConfigKey {
    std::string key;
    ConfigType type;
    std::string description;
};

/// Keys accepted in config files and --set overrides, in documentation order.
const std::vector<ConfigKey>& config_schema();

/// JSON document describing the schema (the content of docs/config_schema.json).
std::string config_schema_json();

/// Sets one key from its textual form. Throws InvalidConfig on unknown keys or bad values.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);

/// Applies a config file: a JSON object (nested objects or dotted keys) or `key = value`
/// lines with `#` comments. Unknown keys are rejected.
void apply_config_text(RunConfig& config, std::string_view text);
void apply_config_file(RunConfig& config, const std::string& path);

/// Effective values of every key as a flat JSON object in schema order.
std::string config_to_json(const RunConfig& config);

/// Hex FNV-1a digest of config_to_json.
std::string config_hash(const RunConfig& config);

/// Runs every module validator.
void validate(const RunConfig& config);

/// Version string baked in at build time.
std::string_view version_string();

}  // namespace memerl
