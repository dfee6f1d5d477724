#pragma once

#include "mcsql/bench_data.hpp"
#include "mcsql/config.hpp"
#include "mcsql/executor.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mcsql {

using Predictions = std::map<std::string, std::optional<std::string>>;

struct ExampleVerdict {
    std::string example_id;
    Difficulty difficulty = Difficulty::unknown;
    bool answered = false;
    bool match = false;
    bool gold_failed = false;
    ExecStatus pred_status = ExecStatus::runtime_error;
    double ves_reward = 0.0;
    bool timing_fallback = false;
};

struct ExecAccuracy {
    double overall = 0.0;
    std::map<Difficulty, double> by_difficulty;
    std::map<Difficulty, std::size_t> counts;
    std::size_t total = 0;
    std::size_t matches = 0;
    std::size_t unanswered = 0;
    std::vector<std::string> gold_failures;
    std::vector<ExampleVerdict> verdicts;
};

struct EvalOptions {
    ExecOptions exec;
    int time_repeats = 3;
};

EvalOptions eval_options_from(const RunConfig& config);

ExecAccuracy exec_accuracy(const Predictions& predictions,
                           const std::vector<BenchmarkExample>& examples,
                           const Benchmark& benchmark, const EvalOptions& options);

// Per matched example sqrt(t_gold / t_pred), 0 on mismatch; 100 * mean.
// Fills the verdicts' ves_reward when given.
double valid_efficiency_score(const Predictions& predictions,
                              const std::vector<BenchmarkExample>& examples,
                              const Benchmark& benchmark, const EvalOptions& options,
                              std::vector<ExampleVerdict>* verdicts = nullptr);

double ves_reward(const std::filesystem::path& db_path, std::string_view gold_sql,
                  std::string_view pred_sql, const EvalOptions& options,
                  bool* timing_fallback = nullptr);

struct LinkingRecall {
    double table_recall = 0.0;
    double column_recall = 0.0;
    std::size_t count = 0;
    std::vector<std::string> vacuous;  // gold extraction came back empty
};

LinkingRecall linking_recall(const std::map<std::string, LinkedSchema>& linked,
                             const std::vector<BenchmarkExample>& examples,
                             const Benchmark& benchmark);

struct EvalReport {
    static constexpr int kSchemaVersion = 1;

    ExecAccuracy ex;
    double ves = 0.0;
    std::optional<LinkingRecall> recall;
};

EvalReport evaluate(const Predictions& predictions, const std::vector<BenchmarkExample>& examples,
                    const Benchmark& benchmark, const EvalOptions& options,
                    const std::map<std::string, LinkedSchema>* linked = nullptr);

nlohmann::json to_json(const EvalReport& report);
std::string render_report_table(const EvalReport& report);
std::string render_verdicts_csv(const EvalReport& report);

}  // namespace mcsql
