#include "mcsql/evaluator.hpp"

#include "mcsql/common.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace mcsql {

using nlohmann::json;

EvalOptions eval_options_from(const RunConfig& config) {
    EvalOptions o;
    o.exec.timeout_ms = config.exec_timeout_ms;
    o.exec.timing = config.timing;
    o.exec.semantics = config.result_semantics;
    o.time_repeats = config.time_repeats;
    return o;
}

namespace {

double percent(std::size_t hits, std::size_t count) {
    return count == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / static_cast<double>(count);
}

ExampleVerdict judge(const BenchmarkExample& ex, const std::optional<std::string>* prediction,
                     const Benchmark& benchmark, const EvalOptions& options) {
    ExampleVerdict v;
    v.example_id = ex.example_id;
    v.difficulty = ex.difficulty;
    const auto& db = benchmark.database_path(ex.db_id);
    auto gold = execute(db, ex.gold_sql, options.exec);
    if (!gold.ok()) {
        v.gold_failed = true;
        return v;
    }
    if (!prediction || !prediction->has_value() || trim(**prediction).empty()) return v;
    v.answered = true;
    auto pred = execute(db, **prediction, options.exec);
    v.pred_status = pred.status;
    v.match = pred.ok() && pred.fingerprint == gold.fingerprint;
    return v;
}

const std::optional<std::string>* lookup(const Predictions& predictions, const std::string& id) {
    auto it = predictions.find(id);
    return it == predictions.end() ? nullptr : &it->second;
}

}  // namespace

ExecAccuracy exec_accuracy(const Predictions& predictions, const std::vector<BenchmarkExample>& examples,
                           const Benchmark& benchmark, const EvalOptions& options) {
    ExecAccuracy acc;
    std::map<Difficulty, std::size_t> bucket_hits;
    for (const auto& ex : examples) {
        auto v = judge(ex, lookup(predictions, ex.example_id), benchmark, options);
        if (v.gold_failed) {
            acc.gold_failures.push_back(ex.example_id);
        } else {
            ++acc.total;
            ++acc.counts[ex.difficulty];
            if (!v.answered) ++acc.unanswered;
            if (v.match) {
                ++acc.matches;
                ++bucket_hits[ex.difficulty];
            }
        }
        acc.verdicts.push_back(std::move(v));
    }
    acc.overall = percent(acc.matches, acc.total);
    for (const auto& [d, count] : acc.counts) acc.by_difficulty[d] = percent(bucket_hits[d], count);
    return acc;
}

double ves_reward(const std::filesystem::path& db_path, std::string_view gold_sql, std::string_view pred_sql,
                  const EvalOptions& options, bool* timing_fallback) {
    if (timing_fallback) *timing_fallback = false;
    try {
        const double t_gold = time_query(db_path, gold_sql, options.time_repeats, options.exec);
        const double t_pred = time_query(db_path, pred_sql, options.time_repeats, options.exec);
        if (t_gold == t_pred) return 1.0;
        if (t_pred <= 0.0 || t_gold <= 0.0) throw ExecutionError("non-positive execution time");
        return std::sqrt(t_gold / t_pred);
    } catch (const ExecutionError& e) {
        spdlog::warn("VES timing failed, reward falls back to 1.0: {}", e.what());
        if (timing_fallback) *timing_fallback = true;
        return 1.0;
    }
}

double valid_efficiency_score(const Predictions& predictions, const std::vector<BenchmarkExample>& examples,
                              const Benchmark& benchmark, const EvalOptions& options,
                              std::vector<ExampleVerdict>* verdicts) {
    std::map<std::string, ExampleVerdict*> known;
    if (verdicts) {
        for (auto& v : *verdicts) known[v.example_id] = &v;
    }
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& ex : examples) {
        ExampleVerdict local;
        ExampleVerdict* v = nullptr;
        if (auto it = known.find(ex.example_id); it != known.end()) {
            v = it->second;
        } else {
            local = judge(ex, lookup(predictions, ex.example_id), benchmark, options);
            v = &local;
        }
        if (v->gold_failed) continue;
        ++count;
        v->ves_reward = 0.0;
        if (v->match) {
            const auto& pred = *lookup(predictions, ex.example_id);
            v->ves_reward = ves_reward(benchmark.database_path(ex.db_id), ex.gold_sql, *pred, options,
                                       &v->timing_fallback);
        }
        total += v->ves_reward;
    }
    return count == 0 ? 0.0 : 100.0 * total / static_cast<double>(count);
}

LinkingRecall linking_recall(const std::map<std::string, LinkedSchema>& linked,
                             const std::vector<BenchmarkExample>& examples, const Benchmark& benchmark) {
    LinkingRecall r;
    std::size_t table_hits = 0;
    std::size_t column_hits = 0;
    for (const auto& ex : examples) {
        auto it = linked.find(ex.example_id);
        if (it == linked.end()) continue;
        ++r.count;
        const auto gold = extract_gold_identifiers(ex.gold_sql, benchmark.schema(ex.db_id));
        if (gold.tables.empty() && gold.columns.empty()) r.vacuous.push_back(ex.example_id);

        std::set<std::string> tables;
        std::set<std::string> columns;
        for (const auto& [t, cols] : it->second.tables) {
            tables.insert(to_lower(t));
            for (const auto& c : cols) columns.insert(to_lower(t) + "." + to_lower(c));
        }
        if (std::includes(tables.begin(), tables.end(), gold.tables.begin(), gold.tables.end())) ++table_hits;
        if (std::includes(columns.begin(), columns.end(), gold.columns.begin(), gold.columns.end())) ++column_hits;
    }
    r.table_recall = percent(table_hits, r.count);
    r.column_recall = percent(column_hits, r.count);
    return r;
}

EvalReport evaluate(const Predictions& predictions, const std::vector<BenchmarkExample>& examples,
                    const Benchmark& benchmark, const EvalOptions& options,
                    const std::map<std::string, LinkedSchema>* linked) {
    EvalReport report;
    report.ex = exec_accuracy(predictions, examples, benchmark, options);
    report.ves = valid_efficiency_score(predictions, examples, benchmark, options, &report.ex.verdicts);
    if (linked) report.recall = linking_recall(*linked, examples, benchmark);
    return report;
}

json to_json(const EvalReport& report) {
    json by_difficulty = json::object();
    json counts = json::object();
    for (const auto& [d, pct] : report.ex.by_difficulty) by_difficulty[std::string(to_string(d))] = pct;
    for (const auto& [d, n] : report.ex.counts) counts[std::string(to_string(d))] = n;
    json j{{"schema_version", EvalReport::kSchemaVersion},
           {"ex_overall", report.ex.overall},
           {"ex_by_difficulty", std::move(by_difficulty)},
           {"counts", std::move(counts)},
           {"total", report.ex.total},
           {"matches", report.ex.matches},
           {"unanswered", report.ex.unanswered},
           {"gold_failures", report.ex.gold_failures},
           {"ves", report.ves}};
    if (report.recall) {
        j["linking_table_recall"] = report.recall->table_recall;
        j["linking_column_recall"] = report.recall->column_recall;
        j["linking_count"] = report.recall->count;
        j["linking_vacuous"] = report.recall->vacuous;
    } else {
        j["linking_table_recall"] = nullptr;
        j["linking_column_recall"] = nullptr;
    }
    return j;
}

std::string render_report_table(const EvalReport& report) {
    std::string out = fmt::format("{:<14} {:>8} {:>8}\n", "bucket", "count", "EX");
    for (const auto& [d, n] : report.ex.counts) {
        out += fmt::format("{:<14} {:>8} {:>8.2f}\n", to_string(d), n, report.ex.by_difficulty.at(d));
    }
    out += fmt::format("{:<14} {:>8} {:>8.2f}\n", "total", report.ex.total, report.ex.overall);
    out += fmt::format("\nVES          {:.2f}\n", report.ves);
    out += fmt::format("unanswered   {}\n", report.ex.unanswered);
    if (!report.ex.gold_failures.empty()) {
        out += fmt::format("gold failures {}\n", fmt::join(report.ex.gold_failures, ", "));
    }
    if (report.recall) {
        out += fmt::format("table recall  {:.2f}\ncolumn recall {:.2f}\n", report.recall->table_recall,
                           report.recall->column_recall);
    }
    return out;
}

std::string render_verdicts_csv(const EvalReport& report) {
    std::string out = "example_id,difficulty,answered,match,gold_failed,pred_status,ves_reward,timing_fallback\n";
    for (const auto& v : report.ex.verdicts) {
        out += fmt::format("{},{},{},{},{},{},{:.6f},{}\n", v.example_id, to_string(v.difficulty), int(v.answered),
                           int(v.match), int(v.gold_failed), v.answered ? to_string(v.pred_status) : "",
                           v.ves_reward, int(v.timing_fallback));
    }
    return out;
}

}  // namespace mcsql
