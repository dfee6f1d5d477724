// fixture_author: records replay fixtures by running the pipeline against the
// scripted backend, with the gateway cache pointed at the replay directory.

#include "mcsql/common.hpp"
#include "mcsql/config.hpp"
#include "mcsql/pipeline.hpp"
#include "scripted_backend.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <filesystem>

namespace fs = std::filesystem;
using nlohmann::json;

int main(int argc, char** argv) {
    CLI::App app{"Record desk replay fixtures from a script"};
    std::string fixture_dir;
    std::string runs_root;
    bool clean = false;
    app.add_option("--fixture-dir", fixture_dir, "directory with config.json, ablations.json and script.json")
        ->required();
    app.add_option("--runs-root", runs_root, "where to put the authoring runs (default: a temp dir)");
    app.add_flag("--clean", clean, "delete the replay directory first");
    CLI11_PARSE(app, argc, argv);

    try {
        const fs::path dir = fs::absolute(fixture_dir);
        auto config = mcsql::load_config_file(dir / "config.json");
        if (clean && fs::exists(config.replay_dir)) fs::remove_all(config.replay_dir);
        config.cache_dir = config.replay_dir;

        const auto dev = mcsql::load_benchmark(config.benchmark_root, mcsql::parse_split(config.split));
        const auto train = mcsql::load_benchmark(config.benchmark_root, mcsql::parse_split(config.train_split));
        auto backend = std::make_shared<mcsql::ScriptedBackend>(mcsql::read_json_file(dir / "script.json"),
                                                                std::vector<const mcsql::Benchmark*>{&dev, &train});

        fs::path root = runs_root.empty() ? fs::temp_directory_path() / fmt::format("mcsql-author-{}", ::getpid())
                                          : fs::path(runs_root);
        fs::remove_all(root);

        std::vector<mcsql::AblationSpec> specs;
        for (const auto& s : mcsql::read_json_file(dir / "ablations.json")) {
            specs.push_back({s.at("name").get<std::string>(), s.value("overrides", json::object())});
        }
        auto rows = mcsql::ablation_run(config, specs, root, backend);
        fmt::print("{}", mcsql::render_ablation_table(rows));
        for (const auto& [stage, count] : backend->calls()) fmt::print("scripted {:<12} {}\n", stage, count);
        if (runs_root.empty()) fs::remove_all(root);
        for (const auto& r : rows) {
            if (!r.ex) return 2;
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 2;
    }
    return 0;
}
