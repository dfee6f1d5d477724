#pragma once

#include "mcsql/bench_data.hpp"
#include "mcsql/config.hpp"
#include "mcsql/evaluator.hpp"
#include "mcsql/fewshot.hpp"
#include "mcsql/llm_gateway.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mcsql {

enum class Stage { link, generate, select, eval };

std::string_view to_string(Stage s);
Stage parse_stage(std::string_view text);

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitBackend = 3;

std::shared_ptr<LlmBackend> make_backend(const RunConfig& config);

// Run directory layout:
//   manifest.json               config snapshot, benchmark hash, stage markers
//   index.json                  few-shot embedding index
//   link/<example>.json         linked schema + linking traces
//   generate/<example>.json     prompts, few-shot variants, candidates
//   select[@v]/<example>.json   pool sizes, confidences, votes
//   predictions[@v].json        BIRD-style {"id": "sql\t----- bird -----\tdb"}
//   predictions[@v].sql         one query per line, Spider style
//   eval[@v]/report.json|report.txt|verdicts.csv
struct StageOptions {
    // Suffix for select/eval outputs so reruns do not overwrite each other.
    std::string variant;
};

struct RunSummary {
    std::filesystem::path run_dir;
    std::optional<EvalReport> report;
    std::size_t examples = 0;
    std::size_t unanswered = 0;
    // Examples whose artifacts record a missing replay fixture.
    std::size_t fixture_misses = 0;
    int exit_code = kExitOk;
};

class Pipeline {
  public:
    // backend == nullptr builds one from config.backend.
    explicit Pipeline(RunConfig config, std::shared_ptr<LlmBackend> backend = nullptr);

    const RunConfig& config() const noexcept { return config_; }
    Gateway& gateway() noexcept { return *gateway_; }
    const Benchmark& benchmark();

    // Restricts stages to these example ids (empty = all).
    void set_example_filter(std::set<std::string> ids) { filter_ = std::move(ids); }

    // Creates or resumes `run_dir`; completed stages are skipped, and inside a
    // stage examples that already have an artifact are skipped.
    RunSummary run(const std::filesystem::path& run_dir);

    // Executes exactly one stage from stored artifacts.
    void run_stage(Stage stage, const std::filesystem::path& run_dir,
                   const StageOptions& options = {});

    EvalReport evaluate_run(const std::filesystem::path& run_dir, const StageOptions& options = {});

  private:
    std::vector<const BenchmarkExample*> selected_examples();
    const ExampleIndex& index(const std::filesystem::path& run_dir);
    const std::string& bench_hash();
    void init_manifest(const std::filesystem::path& run_dir, bool check_config);
    std::size_t count_fixture_misses(const std::filesystem::path& run_dir, const StageOptions& options);

    void stage_link(const std::filesystem::path& run_dir);
    void stage_generate(const std::filesystem::path& run_dir);
    void stage_select(const std::filesystem::path& run_dir, const StageOptions& options);
    EvalReport stage_eval(const std::filesystem::path& run_dir, const StageOptions& options);

    void mark_stage(const std::filesystem::path& run_dir, Stage stage,
                    const nlohmann::json& counters);

    RunConfig config_;
    std::shared_ptr<Gateway> gateway_;
    std::optional<Benchmark> bench_;
    std::optional<Benchmark> train_;
    std::optional<ExampleIndex> index_;
    std::optional<std::string> bench_hash_;
    std::set<std::string> filter_;
};

std::string default_run_name();
std::string benchmark_hash(const Benchmark& benchmark);

nlohmann::json read_json_file(const std::filesystem::path& path);
// Write-temp-then-rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j);

struct AblationSpec {
    std::string name;
    nlohmann::json overrides;
};

struct AblationRow {
    std::string name;
    std::optional<ExecAccuracy> ex;
    std::string error;
};

// One full run per spec under <runs_root>/<name>, same backend for all rows.
std::vector<AblationRow> ablation_run(const RunConfig& base, const std::vector<AblationSpec>& specs,
                                      const std::filesystem::path& runs_root,
                                      std::shared_ptr<LlmBackend> backend = nullptr);
std::string render_ablation_table(const std::vector<AblationRow>& rows);

}  // namespace mcsql
