// mcsql: command-line front end for the text-to-SQL pipeline.

#include "mcsql/cache_admin.hpp"
#include "mcsql/common.hpp"
#include "mcsql/config.hpp"
#include "mcsql/pipeline.hpp"
#include "mcsql/version.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flags shared by `run`, `stage` and `ablate`. Every one maps to a config key
// and wins over the config file.
struct ConfigFlags {
    std::string config_file;
    std::optional<int> p_t, p_c, p_q, n, k, sample_rows, max_choices, exec_timeout_ms, workers, max_in_flight;
    std::optional<double> threshold, temperature, max_unanswered_pct;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> backend, split, benchmark_root, replay_dir, cache_dir, chat_model, embedding_model,
        profile, selection, timing;
    std::vector<std::string> sets;

    void attach(CLI::App& app) {
        app.add_option("-c,--config", config_file, "JSON config file");
        app.add_option("--profile", profile, "standard or desk");
        app.add_option("--p-t", p_t, "table-linking prompts");
        app.add_option("--p-c", p_c, "column-linking prompts");
        app.add_option("--p-q", p_q, "generation prompts");
        app.add_option("-n,--samples", n, "samples per prompt");
        app.add_option("-k,--fewshot-k", k, "few-shot examples per prompt");
        app.add_option("-T,--threshold", threshold, "confidence threshold");
        app.add_option("--temperature", temperature, "sampling temperature");
        app.add_option("--timeout-ms", exec_timeout_ms, "per-query execution timeout");
        app.add_option("--sample-rows", sample_rows, "CSV rows per table in prompts");
        app.add_option("--max-choices", max_choices, "candidates shown to the selector");
        app.add_option("--seed", seed, "base seed for prompt shuffles");
        app.add_option("--backend", backend, "live, replay or strict_replay");
        app.add_option("--split", split, "benchmark split");
        app.add_option("--benchmark-root", benchmark_root, "benchmark directory");
        app.add_option("--replay-dir", replay_dir, "recorded responses");
        app.add_option("--cache-dir", cache_dir, "response cache directory");
        app.add_option("--chat-model", chat_model);
        app.add_option("--embedding-model", embedding_model);
        app.add_option("--selection", selection, "mcs, majority_vote or mcs_without_filter");
        app.add_option("--timing", timing, "wall_clock or vm_steps");
        app.add_option("--workers", workers, "examples processed in parallel");
        app.add_option("--max-in-flight", max_in_flight, "concurrent model requests");
        app.add_option("--max-unanswered-pct", max_unanswered_pct, "exit 3 above this share of unanswered examples");
        app.add_option("--set", sets, "extra config override KEY=JSON");
    }

    json overrides() const {
        json j = json::object();
        auto put = [&](const char* key, const auto& v) {
            if (v) j[key] = *v;
        };
        auto put_path = [&](const char* key, const std::optional<std::string>& v) {
            if (v) j[key] = fs::absolute(*v).lexically_normal().generic_string();
        };
        put("profile", profile);
        put("p_t", p_t);
        put("p_c", p_c);
        put("p_q", p_q);
        put("n", n);
        put("k", k);
        put("T", threshold);
        put("temperature", temperature);
        put("exec_timeout_ms", exec_timeout_ms);
        put("sample_rows", sample_rows);
        put("max_choices", max_choices);
        put("seed", seed);
        put("backend", backend);
        put("split", split);
        put("chat_model", chat_model);
        put("embedding_model", embedding_model);
        put("selection", selection);
        put("timing", timing);
        put("workers", workers);
        put("max_in_flight", max_in_flight);
        put("max_unanswered_pct", max_unanswered_pct);
        put_path("benchmark_root", benchmark_root);
        put_path("replay_dir", replay_dir);
        put_path("cache_dir", cache_dir);
        for (const auto& s : sets) {
            auto eq = s.find('=');
            if (eq == std::string::npos) throw mcsql::ConfigError("--set expects KEY=VALUE, got '" + s + "'");
            auto value = json::parse(s.substr(eq + 1), nullptr, false);
            // Bare words are taken as strings.
            j[s.substr(0, eq)] = value.is_discarded() ? json(s.substr(eq + 1)) : value;
        }
        return j;
    }

    mcsql::RunConfig resolve(const std::optional<fs::path>& run_dir = std::nullopt) const {
        mcsql::RunConfig config;
        if (!config_file.empty()) {
            config = mcsql::load_config_file(config_file);
        } else if (run_dir && fs::exists(*run_dir / "manifest.json")) {
            mcsql::apply_config_json(config, mcsql::read_json_file(*run_dir / "manifest.json").at("config"));
        }
        mcsql::apply_config_json(config, overrides());
        config.validate();
        return config;
    }
};

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const mcsql::ConfigError*>(&e)) return mcsql::kExitUsage;
    if (dynamic_cast<const mcsql::GatewayError*>(&e)) return mcsql::kExitBackend;
    return mcsql::kExitData;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("mcsql"));
    spdlog::set_pattern("[%l] %v");

    CLI::App app{"Multi-candidate text-to-SQL pipeline"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "debug logging");

    // run
    auto* run = app.add_subcommand("run", "link, generate, select and evaluate");
    ConfigFlags run_flags;
    run_flags.attach(*run);
    std::string run_dir;
    std::vector<std::string> run_examples;
    run->add_option("--run-dir", run_dir, "run directory (default: <runs_dir>/<timestamp>)");
    run->add_option("--example", run_examples, "restrict to these example ids");

    // stage
    auto* stage = app.add_subcommand("stage", "run exactly one stage on an existing run directory");
    ConfigFlags stage_flags;
    stage_flags.attach(*stage);
    std::string stage_name, stage_dir, variant;
    std::vector<std::string> stage_examples;
    stage->add_option("name", stage_name, "link, generate, select or eval")->required();
    stage->add_option("--run-dir", stage_dir, "run directory")->required();
    stage->add_option("--variant", variant, "suffix for select/eval outputs");
    stage->add_option("--example", stage_examples, "restrict to these example ids");

    // cache
    auto* cache = app.add_subcommand("cache", "inspect and move response caches");
    std::string cache_action, cache_dir, cache_tag, bundle;
    cache->add_option("action", cache_action, "stats, prune, export or import")
        ->required()
        ->check(CLI::IsMember({"stats", "prune", "export", "import"}));
    cache->add_option("--dir", cache_dir, "cache directory")->required();
    cache->add_option("--tag", cache_tag, "stage tag for prune");
    cache->add_option("--bundle", bundle, "bundle directory for export/import");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "one full run per named config override");
    ConfigFlags ablate_flags;
    ablate_flags.attach(*ablate);
    std::string spec_file, runs_root;
    ablate->add_option("--specs", spec_file, "JSON list of {name, overrides}")->required();
    ablate->add_option("--runs-root", runs_root, "parent directory for the runs")->required();

    app.add_subcommand("version", "print the version");

    CLI11_PARSE(app, argc, argv);
    if (verbose) spdlog::set_level(spdlog::level::debug);

    try {
        if (app.got_subcommand("version")) {
            fmt::print("mcsql {}\n", mcsql::kVersion);
            return mcsql::kExitOk;
        }

        if (app.got_subcommand(run)) {
            auto config = run_flags.resolve();
            fs::path dir = run_dir.empty() ? config.runs_dir / mcsql::default_run_name() : fs::path(run_dir);
            mcsql::Pipeline pipeline(config);
            pipeline.set_example_filter({run_examples.begin(), run_examples.end()});
            auto summary = pipeline.run(dir);
            fmt::print("{}", mcsql::render_report_table(*summary.report));
            fmt::print("run directory: {}\n", summary.run_dir.string());
            return summary.exit_code;
        }

        if (app.got_subcommand(stage)) {
            auto config = stage_flags.resolve(fs::path(stage_dir));
            mcsql::Pipeline pipeline(config);
            pipeline.set_example_filter({stage_examples.begin(), stage_examples.end()});
            const auto which = mcsql::parse_stage(stage_name);
            mcsql::StageOptions options{variant};
            if (which == mcsql::Stage::eval) {
                fmt::print("{}", mcsql::render_report_table(pipeline.evaluate_run(stage_dir, options)));
            } else {
                pipeline.run_stage(which, stage_dir, options);
            }
            return mcsql::kExitOk;
        }

        if (app.got_subcommand(cache)) {
            if (cache_action == "stats") {
                fmt::print("{}", mcsql::render_cache_stats(mcsql::cache_stats(cache_dir)));
            } else if (cache_action == "prune") {
                if (cache_tag.empty()) throw mcsql::ConfigError("prune needs --tag");
                fmt::print("removed {} entries\n", mcsql::cache_prune(cache_dir, cache_tag));
            } else if (cache_action == "export") {
                if (bundle.empty()) throw mcsql::ConfigError("export needs --bundle");
                fmt::print("exported {} entries\n", mcsql::cache_export(cache_dir, bundle));
            } else {
                if (bundle.empty()) throw mcsql::ConfigError("import needs --bundle");
                fmt::print("imported {} entries\n", mcsql::cache_import(bundle, cache_dir));
            }
            return mcsql::kExitOk;
        }

        if (app.got_subcommand(ablate)) {
            auto base = ablate_flags.resolve();
            std::vector<mcsql::AblationSpec> specs;
            for (const auto& s : mcsql::read_json_file(spec_file)) {
                specs.push_back({s.at("name").get<std::string>(), s.value("overrides", json::object())});
            }
            auto rows = mcsql::ablation_run(base, specs, runs_root);
            fmt::print("{}", mcsql::render_ablation_table(rows));
            for (const auto& r : rows) {
                if (!r.ex) return mcsql::kExitData;
            }
            return mcsql::kExitOk;
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return exit_code_for(e);
    }
    return mcsql::kExitUsage;
}
