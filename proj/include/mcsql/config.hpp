#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace mcsql {

enum class Backend { live, replay, strict_replay };
enum class TimingMode { wall_clock, vm_steps };
enum class ResultSemantics { multiset, set };

// Final-selection strategy, for ablations. `mcs` is the full method.
enum class SelectionMode { mcs, majority_vote, mcs_without_filter };

struct RunConfig {
    int p_t = 3;
    int p_c = 3;
    int p_q = 5;
    int n = 20;
    int k = 20;
    double threshold = 0.2;
    double temperature = 1.0;
    int exec_timeout_ms = 180000;
    int sample_rows = 3;
    int max_choices = 3;
    std::uint64_t seed = 0;

    Backend backend = Backend::live;
    std::string chat_model = "gpt-4";
    std::string embedding_model = "text-embedding-ada-002";
    std::string api_base_url = "https://api.openai.com/v1";
    std::string api_key_env = "OPENAI_API_KEY";

    std::filesystem::path benchmark_root;
    std::string split = "dev";
    std::string train_split = "train";
    std::filesystem::path replay_dir;
    std::optional<std::filesystem::path> cache_dir;
    std::filesystem::path runs_dir = "runs";

    int workers = 1;
    int max_in_flight = 4;
    int max_output_tokens = 2048;
    TimingMode timing = TimingMode::wall_clock;
    int time_repeats = 3;
    ResultSemantics result_semantics = ResultSemantics::multiset;
    double max_unanswered_pct = 100.0;

    // Ablation switches.
    bool schema_linking = true;
    bool fewshot = true;
    SelectionMode selection = SelectionMode::mcs;
    bool fallback_full_schema_on_link_error = true;

    // Throws ConfigError naming the offending key.
    void validate() const;

    // Snapshot used for manifests and resume checks. Paths are included so a
    // resumed run cannot silently switch benchmarks.
    nlohmann::json to_json() const;
    std::string hash() const;
};

// Applies "profile" first ("standard" or "desk"), then every other key.
// Unknown keys are rejected.
void apply_config_json(RunConfig& config, const nlohmann::json& doc);
RunConfig load_config_file(const std::filesystem::path& path);

// Desk-scale defaults: 5 s executor timeout, deterministic timing.
void apply_desk_profile(RunConfig& config);

}  // namespace mcsql
