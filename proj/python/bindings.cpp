// Python bindings: a thin layer over the pipeline, executor and evaluator.
// Structured results cross the boundary as JSON text and are decoded on the
// Python side.

#include "mcsql/cache_admin.hpp"
#include "mcsql/common.hpp"
#include "mcsql/config.hpp"
#include "mcsql/evaluator.hpp"
#include "mcsql/executor.hpp"
#include "mcsql/pipeline.hpp"
#include "mcsql/version.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

mcsql::RunConfig resolve_config(const fs::path& config_file, const std::string& overrides_json) {
    auto config = mcsql::load_config_file(config_file);
    if (!overrides_json.empty()) mcsql::apply_config_json(config, json::parse(overrides_json));
    config.validate();
    return config;
}

std::string run(const fs::path& config_file, const fs::path& run_dir, const std::string& overrides_json,
                const std::vector<std::string>& examples) {
    auto config = resolve_config(config_file, overrides_json);
    mcsql::RunSummary summary;
    {
        py::gil_scoped_release release;
        mcsql::Pipeline pipeline(config);
        pipeline.set_example_filter({examples.begin(), examples.end()});
        summary = pipeline.run(run_dir);
    }
    json out{{"run_dir", summary.run_dir.string()},
             {"exit_code", summary.exit_code},
             {"fixture_misses", summary.fixture_misses},
             {"report", mcsql::to_json(*summary.report)}};
    return out.dump();
}

std::string execute(const fs::path& db, const std::string& sql, bool deterministic_timing, int timeout_ms) {
    mcsql::ExecOptions options;
    options.timeout_ms = timeout_ms;
    options.timing = deterministic_timing ? mcsql::TimingMode::vm_steps : mcsql::TimingMode::wall_clock;
    mcsql::ExecutionOutcome o;
    {
        py::gil_scoped_release release;
        o = mcsql::execute(db, sql, options);
    }
    return json{{"status", std::string(mcsql::to_string(o.status))},
                {"fingerprint", o.fingerprint ? json(o.fingerprint->hex()) : json(nullptr)},
                {"row_count", o.row_count ? json(*o.row_count) : json(nullptr)},
                {"exec_time_ms", o.exec_time_ms ? json(*o.exec_time_ms) : json(nullptr)},
                {"error", o.error_message}}
        .dump();
}

std::string cache_stats(const fs::path& dir) {
    const auto stats = mcsql::cache_stats(dir);
    json by_stage = json::object();
    for (const auto& [stage, b] : stats.by_stage) by_stage[stage] = {{"entries", b.entries}, {"bytes", b.bytes}};
    json corrupt = json::array();
    for (const auto& p : stats.corrupt) corrupt.push_back(p.string());
    return json{{"by_stage", by_stage}, {"corrupt", corrupt}, {"total", stats.total_entries()}}.dump();
}

}  // namespace

PYBIND11_MODULE(_mcsql, m) {
    m.doc() = "Native core of the mcsql text-to-SQL pipeline";
    m.attr("__version__") = std::string(mcsql::kVersion);

    // Registered base first: pybind11 tries the most recent translator first.
    auto& error = py::register_exception<mcsql::Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<mcsql::ConfigError>(m, "ConfigError", error.ptr());

    m.def("resolved_config", [](const fs::path& config_file, const std::string& overrides_json) {
        return resolve_config(config_file, overrides_json).to_json().dump();
    }, py::arg("config_file"), py::arg("overrides_json") = "");
    m.def("run", &run, py::arg("config_file"), py::arg("run_dir"), py::arg("overrides_json") = "",
          py::arg("examples") = std::vector<std::string>{});
    m.def("execute", &execute, py::arg("db"), py::arg("sql"), py::arg("deterministic_timing") = true,
          py::arg("timeout_ms") = 5000);
    m.def("cache_stats", &cache_stats, py::arg("dir"));
}
