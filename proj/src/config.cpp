#include "mcsql/config.hpp"

#include "mcsql/common.hpp"

#include <fmt/format.h>

#include <fstream>
#include <set>
#include <sstream>

namespace mcsql {

using nlohmann::json;

namespace {

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::live: return "live";
        case Backend::replay: return "replay";
        case Backend::strict_replay: return "strict_replay";
    }
    return "live";
}

const char* timing_name(TimingMode t) { return t == TimingMode::vm_steps ? "vm_steps" : "wall_clock"; }

const char* semantics_name(ResultSemantics s) { return s == ResultSemantics::set ? "set" : "multiset"; }

const char* selection_name(SelectionMode s) {
    switch (s) {
        case SelectionMode::mcs: return "mcs";
        case SelectionMode::majority_vote: return "majority_vote";
        case SelectionMode::mcs_without_filter: return "mcs_without_filter";
    }
    return "mcs";
}

template <typename T>
T get_as(const json& doc, const std::string& key) {
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
    }
}

}  // namespace

void RunConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) throw ConfigError(fmt::format("{} must be >= 1 (got {})", name, v));
    };
    positive(p_t, "p_t");
    positive(p_c, "p_c");
    positive(p_q, "p_q");
    positive(n, "n");
    positive(k, "k");
    positive(max_choices, "max_choices");
    positive(workers, "workers");
    positive(max_in_flight, "max_in_flight");
    positive(time_repeats, "time_repeats");
    positive(exec_timeout_ms, "exec_timeout_ms");
    positive(max_output_tokens, "max_output_tokens");
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ConfigError(fmt::format("T must lie in [0, 1] (got {})", threshold));
    }
    if (!(temperature >= 0.0)) {
        throw ConfigError(fmt::format("temperature must be >= 0 (got {})", temperature));
    }
    if (sample_rows < 0) throw ConfigError("sample_rows must be >= 0");
    if (max_unanswered_pct < 0.0 || max_unanswered_pct > 100.0) {
        throw ConfigError("max_unanswered_pct must lie in [0, 100]");
    }
    if (backend != Backend::live && replay_dir.empty()) {
        throw ConfigError("replay backends need replay_dir");
    }
    if (split != "train" && split != "dev" && split != "test") {
        throw ConfigError("split must be train, dev or test");
    }
}

json RunConfig::to_json() const {
    return json{{"p_t", p_t},
                {"p_c", p_c},
                {"p_q", p_q},
                {"n", n},
                {"k", k},
                {"T", threshold},
                {"temperature", temperature},
                {"exec_timeout_ms", exec_timeout_ms},
                {"sample_rows", sample_rows},
                {"max_choices", max_choices},
                {"seed", seed},
                {"backend", backend_name(backend)},
                {"chat_model", chat_model},
                {"embedding_model", embedding_model},
                {"api_base_url", api_base_url},
                {"api_key_env", api_key_env},
                {"benchmark_root", benchmark_root.generic_string()},
                {"split", split},
                {"train_split", train_split},
                {"replay_dir", replay_dir.generic_string()},
                {"cache_dir", cache_dir ? json(cache_dir->generic_string()) : json(nullptr)},
                {"runs_dir", runs_dir.generic_string()},
                {"workers", workers},
                {"max_in_flight", max_in_flight},
                {"max_output_tokens", max_output_tokens},
                {"timing", timing_name(timing)},
                {"time_repeats", time_repeats},
                {"result_semantics", semantics_name(result_semantics)},
                {"max_unanswered_pct", max_unanswered_pct},
                {"schema_linking", schema_linking},
                {"fewshot", fewshot},
                {"selection", selection_name(selection)},
                {"fallback_full_schema_on_link_error", fallback_full_schema_on_link_error}};
}

std::string RunConfig::hash() const {
    json j = to_json();
    // Operational knobs that do not change results.
    for (const char* key : {"workers", "max_in_flight", "runs_dir", "cache_dir"}) j.erase(key);
    return sha256_hex(j.dump());
}

void apply_desk_profile(RunConfig& config) {
    config.exec_timeout_ms = 5000;
    config.timing = TimingMode::vm_steps;
}

void apply_config_json(RunConfig& config, const json& doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    if (doc.contains("profile")) {
        auto profile = get_as<std::string>(doc, "profile");
        if (profile == "desk") apply_desk_profile(config);
        else if (profile == "standard") config.exec_timeout_ms = 180000;
        else throw ConfigError("unknown profile '" + profile + "'");
    }
    for (const auto& [key, value] : doc.items()) {
        if (key == "profile") continue;
        if (key == "p_t") config.p_t = get_as<int>(doc, key);
        else if (key == "p_c") config.p_c = get_as<int>(doc, key);
        else if (key == "p_q") config.p_q = get_as<int>(doc, key);
        else if (key == "n") config.n = get_as<int>(doc, key);
        else if (key == "k") config.k = get_as<int>(doc, key);
        else if (key == "T" || key == "threshold") config.threshold = get_as<double>(doc, key);
        else if (key == "temperature") config.temperature = get_as<double>(doc, key);
        else if (key == "exec_timeout_ms") config.exec_timeout_ms = get_as<int>(doc, key);
        else if (key == "sample_rows") config.sample_rows = get_as<int>(doc, key);
        else if (key == "max_choices") config.max_choices = get_as<int>(doc, key);
        else if (key == "seed") config.seed = get_as<std::uint64_t>(doc, key);
        else if (key == "backend") {
            auto b = get_as<std::string>(doc, key);
            if (b == "live") config.backend = Backend::live;
            else if (b == "replay") config.backend = Backend::replay;
            else if (b == "strict_replay") config.backend = Backend::strict_replay;
            else throw ConfigError("unknown backend '" + b + "'");
        } else if (key == "chat_model") config.chat_model = get_as<std::string>(doc, key);
        else if (key == "embedding_model") config.embedding_model = get_as<std::string>(doc, key);
        else if (key == "api_base_url") config.api_base_url = get_as<std::string>(doc, key);
        else if (key == "api_key_env") config.api_key_env = get_as<std::string>(doc, key);
        else if (key == "benchmark_root") config.benchmark_root = get_as<std::string>(doc, key);
        else if (key == "split") config.split = get_as<std::string>(doc, key);
        else if (key == "train_split") config.train_split = get_as<std::string>(doc, key);
        else if (key == "replay_dir") config.replay_dir = get_as<std::string>(doc, key);
        else if (key == "cache_dir") {
            if (value.is_null()) config.cache_dir.reset();
            else config.cache_dir = get_as<std::string>(doc, key);
        } else if (key == "runs_dir") config.runs_dir = get_as<std::string>(doc, key);
        else if (key == "workers") config.workers = get_as<int>(doc, key);
        else if (key == "max_in_flight") config.max_in_flight = get_as<int>(doc, key);
        else if (key == "max_output_tokens") config.max_output_tokens = get_as<int>(doc, key);
        else if (key == "timing") {
            auto t = get_as<std::string>(doc, key);
            if (t == "wall_clock") config.timing = TimingMode::wall_clock;
            else if (t == "vm_steps") config.timing = TimingMode::vm_steps;
            else throw ConfigError("unknown timing '" + t + "'");
        } else if (key == "time_repeats") config.time_repeats = get_as<int>(doc, key);
        else if (key == "result_semantics") {
            auto s = get_as<std::string>(doc, key);
            if (s == "multiset") config.result_semantics = ResultSemantics::multiset;
            else if (s == "set") config.result_semantics = ResultSemantics::set;
            else throw ConfigError("unknown result_semantics '" + s + "'");
        } else if (key == "max_unanswered_pct") config.max_unanswered_pct = get_as<double>(doc, key);
        else if (key == "schema_linking") config.schema_linking = get_as<bool>(doc, key);
        else if (key == "fewshot") config.fewshot = get_as<bool>(doc, key);
        else if (key == "selection") {
            auto s = get_as<std::string>(doc, key);
            if (s == "mcs") config.selection = SelectionMode::mcs;
            else if (s == "majority_vote") config.selection = SelectionMode::majority_vote;
            else if (s == "mcs_without_filter") config.selection = SelectionMode::mcs_without_filter;
            else throw ConfigError("unknown selection '" + s + "'");
        } else if (key == "fallback_full_schema_on_link_error") {
            config.fallback_full_schema_on_link_error = get_as<bool>(doc, key);
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
}

RunConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    json doc = json::parse(ss.str(), nullptr, false, true);
    if (doc.is_discarded()) throw ConfigError("config is not valid JSON: " + path.string());
    RunConfig config;
    // Relative paths in a config file are relative to the file itself.
    const auto base = path.parent_path();
    for (const char* key : {"benchmark_root", "replay_dir", "cache_dir", "runs_dir"}) {
        if (doc.contains(key) && doc[key].is_string()) {
            std::filesystem::path p = doc[key].get<std::string>();
            if (p.is_relative()) doc[key] = (base / p).lexically_normal().generic_string();
        }
    }
    apply_config_json(config, doc);
    return config;
}

}  // namespace mcsql
