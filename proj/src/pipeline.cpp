#include "mcsql/pipeline.hpp"

#include "mcsql/common.hpp"
#include "mcsql/executor.hpp"
#include "mcsql/generator.hpp"
#include "mcsql/schema_linker.hpp"
#include "mcsql/selector.hpp"
#include "mcsql/sqlite_db.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

namespace mcsql {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kManifestVersion = 1;
constexpr std::string_view kBirdSeparator = "\t----- bird -----\t";

std::string with_variant(std::string_view base, const StageOptions& options) {
    return options.variant.empty() ? std::string(base) : fmt::format("{}@{}", base, options.variant);
}

fs::path artifact(const fs::path& run_dir, std::string_view dir, std::string_view example_id) {
    return run_dir / dir / (std::string(example_id) + ".json");
}

std::string utc_now() {
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr)));
}

json outcome_to_json(const ExecutionOutcome& o) {
    return json{{"status", std::string(to_string(o.status))},
                {"fingerprint", o.fingerprint ? json(o.fingerprint->hex()) : json(nullptr)},
                {"row_count", o.row_count ? json(*o.row_count) : json(nullptr)},
                {"exec_time_ms", o.exec_time_ms ? json(*o.exec_time_ms) : json(nullptr)},
                {"error", o.error_message}};
}

ExecutionOutcome outcome_from_json(const json& j) {
    ExecutionOutcome o;
    o.status = parse_exec_status(j.at("status").get<std::string>());
    if (!j.at("fingerprint").is_null()) o.fingerprint = ResultFingerprint::from_hex(j.at("fingerprint").get<std::string>());
    if (!j.at("row_count").is_null()) o.row_count = j.at("row_count").get<std::int64_t>();
    if (!j.at("exec_time_ms").is_null()) o.exec_time_ms = j.at("exec_time_ms").get<double>();
    o.error_message = j.value("error", "");
    return o;
}

// Per-example failure note stored in an artifact instead of aborting the run.
void record_error(json& doc, const std::exception& e) {
    doc["error"] = e.what();
    doc["error_kind"] = dynamic_cast<const FixtureMissingError*>(&e) ? "fixture_missing"
                        : dynamic_cast<const GatewayError*>(&e)      ? "gateway"
                        : dynamic_cast<const LinkingError*>(&e)      ? "linking"
                        : dynamic_cast<const GenerationError*>(&e)   ? "generation"
                                                                     : "other";
}

// Runs fn over every example with `workers` threads. fn handles per-example
// failures itself; anything it lets escape stops the stage.
void for_each_example(const std::vector<const BenchmarkExample*>& examples, int workers,
                      const std::function<void(const BenchmarkExample&)>& fn) {
    if (workers <= 1 || examples.size() <= 1) {
        for (const auto* ex : examples) fn(*ex);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(workers), examples.size());
    for (std::size_t w = 0; w < count; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < examples.size(); i = next++) {
                try {
                    fn(*examples[i]);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = examples.size();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

Predictions read_predictions(const fs::path& path) {
    Predictions out;
    const json doc = read_json_file(path);
    for (const auto& [id, value] : doc.items()) {
        std::string text = value.get<std::string>();
        auto cut = text.find(kBirdSeparator);
        std::string sql = cut == std::string::npos ? text : text.substr(0, cut);
        if (trim(sql).empty()) out[id] = std::nullopt;
        else out[id] = sql;
    }
    return out;
}

}  // namespace

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::link: return "link";
        case Stage::generate: return "generate";
        case Stage::select: return "select";
        case Stage::eval: return "eval";
    }
    return "link";
}

Stage parse_stage(std::string_view text) {
    if (text == "link") return Stage::link;
    if (text == "generate") return Stage::generate;
    if (text == "select") return Stage::select;
    if (text == "eval") return Stage::eval;
    throw ConfigError(fmt::format("unknown stage '{}' (expected link, generate, select or eval)", text));
}

std::shared_ptr<LlmBackend> make_backend(const RunConfig& config) {
    switch (config.backend) {
        case Backend::replay: return std::make_shared<ReplayBackend>(config.replay_dir, false);
        case Backend::strict_replay: return std::make_shared<ReplayBackend>(config.replay_dir, true);
        case Backend::live: break;
    }
    const char* key = std::getenv(config.api_key_env.c_str());
    if (!key || !*key) {
        throw GatewayError(fmt::format("live backend needs the {} environment variable", config.api_key_env));
    }
    HttpBackendOptions options;
    options.base_url = config.api_base_url;
    options.api_key = key;
    return std::make_shared<HttpBackend>(std::move(options));
}

// ---------------------------------------------------------------------------
// File helpers

json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StageError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    json doc = json::parse(ss.str(), nullptr, false);
    if (doc.is_discarded()) throw ParseError("malformed JSON in " + path.string(), ss.str().substr(0, 200));
    return doc;
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += fmt::format(".tmp{}", std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StageError("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw StageError("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_json_atomic(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::string default_run_name() {
    return fmt::format("run-{:%Y%m%d-%H%M%S}", fmt::gmtime(std::time(nullptr)));
}

std::string benchmark_hash(const Benchmark& benchmark) {
    std::string payload;
    for (const auto& ex : benchmark.examples) {
        payload += fmt::format("{}\x1f{}\x1f{}\x1f{}\x1f{}\x1f{}\x1e", ex.example_id, ex.db_id, ex.question,
                               ex.evidence.value_or("\x01"), ex.gold_sql, to_string(ex.difficulty));
    }
    RenderOptions typed;
    typed.with_types = true;
    for (const auto& [db_id, schema] : benchmark.schemas) {
        payload += db_id + "\x1f" + render_schema(schema, nullptr, typed) + "\x1e";
        auto full = LinkedSchema::full(schema);
        payload += render_column_descriptions(schema, full) + "\x1e";
    }
    for (const auto& [db_id, path] : benchmark.database_paths) {
        std::ifstream in(path, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        payload += db_id + "\x1f" + sha256_hex(ss.str()) + "\x1e";
    }
    return sha256_hex(payload);
}

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(RunConfig config, std::shared_ptr<LlmBackend> backend) : config_(std::move(config)) {
    config_.validate();
    if (!backend) backend = make_backend(config_);
    GatewayOptions options;
    options.chat_model = config_.chat_model;
    options.embedding_model = config_.embedding_model;
    options.cache_dir = config_.cache_dir;
    options.max_in_flight = config_.max_in_flight;
    gateway_ = std::make_shared<Gateway>(std::move(options), std::move(backend));
}

const Benchmark& Pipeline::benchmark() {
    if (!bench_) bench_ = load_benchmark(config_.benchmark_root, parse_split(config_.split));
    return *bench_;
}

const std::string& Pipeline::bench_hash() {
    if (!bench_hash_) bench_hash_ = benchmark_hash(benchmark());
    return *bench_hash_;
}

std::vector<const BenchmarkExample*> Pipeline::selected_examples() {
    std::vector<const BenchmarkExample*> out;
    std::set<std::string> seen;
    for (const auto& ex : benchmark().examples) {
        if (filter_.empty() || filter_.contains(ex.example_id)) {
            out.push_back(&ex);
            seen.insert(ex.example_id);
        }
    }
    for (const auto& id : filter_) {
        if (!seen.contains(id)) throw LoadError(fmt::format("example '{}' is not in split {}", id, config_.split));
    }
    return out;
}

const ExampleIndex& Pipeline::index(const fs::path& run_dir) {
    if (index_) return *index_;
    const auto path = run_dir / "index.json";
    if (fs::exists(path)) {
        index_ = ExampleIndex::load(path);
        return *index_;
    }
    if (!train_) train_ = load_benchmark(config_.benchmark_root, parse_split(config_.train_split));
    index_ = build_index(*gateway_, train_->examples, train_->schemas);
    index_->save(path);
    return *index_;
}

void Pipeline::init_manifest(const fs::path& run_dir, bool check_config) {
    fs::create_directories(run_dir);
    const auto path = run_dir / "manifest.json";
    if (fs::exists(path)) {
        auto manifest = read_json_file(path);
        if (check_config && manifest.value("config_hash", "") != config_.hash()) {
            throw ConfigError(fmt::format("{} was created with a different configuration; refusing to resume",
                                          run_dir.string()));
        }
        if (manifest.at("benchmark").value("hash", "") != bench_hash()) {
            throw LoadError(fmt::format("benchmark contents changed since {} was created", run_dir.string()));
        }
        return;
    }
    json manifest{{"version", kManifestVersion},
                  {"created_at", utc_now()},
                  {"config", config_.to_json()},
                  {"config_hash", config_.hash()},
                  {"benchmark",
                   {{"root", config_.benchmark_root.generic_string()},
                    {"split", config_.split},
                    {"hash", bench_hash()}}},
                  {"stages", json::object()}};
    write_json_atomic(path, manifest);
}

void Pipeline::mark_stage(const fs::path& run_dir, Stage stage, const json& counters) {
    const auto path = run_dir / "manifest.json";
    auto manifest = read_json_file(path);
    std::string key(to_string(stage));
    if (counters.contains("variant") && !counters.at("variant").get<std::string>().empty()) {
        key += "@" + counters.at("variant").get<std::string>();
    }
    // A filtered pass only covers part of the split, so it does not complete the stage.
    manifest["stages"][key] = {{"completed", filter_.empty()}, {"at", utc_now()}, {"counters", counters}};
    write_json_atomic(path, manifest);
}

void Pipeline::stage_link(const fs::path& run_dir) {
    const auto examples = selected_examples();
    std::atomic<int> errors{0}, full_schema{0}, widened{0}, skipped{0};
    for_each_example(examples, config_.workers, [&](const BenchmarkExample& ex) {
        const auto out_path = artifact(run_dir, "link", ex.example_id);
        if (fs::exists(out_path)) {
            ++skipped;
            return;
        }
        const auto& schema = benchmark().schema(ex.db_id);
        json doc{{"example_id", ex.example_id}, {"db_id", ex.db_id}, {"full_schema", false}};
        std::optional<LinkedSchema> linked;
        json traces = json::array();
        if (!config_.schema_linking) {
            linked = LinkedSchema::full(schema);
            doc["full_schema"] = true;
        } else {
            try {
                auto tables = link_tables(*gateway_, ex, schema, config_);
                auto columns = link_columns(*gateway_, ex, schema, tables.tables, config_);
                for (const auto& t : tables.traces) traces.push_back(to_json(t));
                for (const auto& t : columns.traces) {
                    traces.push_back(to_json(t));
                    if (!t.fallbacks.empty()) ++widened;
                }
                linked = std::move(columns.linked);
            } catch (const LinkingError& e) {
                record_error(doc, e);
                ++errors;
                if (config_.fallback_full_schema_on_link_error) {
                    linked = LinkedSchema::full(schema);
                    doc["full_schema"] = true;
                    ++full_schema;
                }
            } catch (const GatewayError& e) {
                record_error(doc, e);
                ++errors;
            }
        }
        doc["linked"] = linked ? to_json(*linked) : json(nullptr);
        doc["traces"] = std::move(traces);
        write_json_atomic(out_path, doc);
    });
    mark_stage(run_dir, Stage::link,
               {{"examples", examples.size()},
                {"errors", errors.load()},
                {"full_schema_fallbacks", full_schema.load()},
                {"widened_tables", widened.load()},
                {"resumed", skipped.load()}});
}

void Pipeline::stage_generate(const fs::path& run_dir) {
    const auto examples = selected_examples();
    for (const auto* ex : examples) {
        if (!fs::exists(artifact(run_dir, "link", ex->example_id))) {
            throw StageError(fmt::format("generate needs link/{}.json; run the link stage first", ex->example_id));
        }
    }
    const ExampleIndex* idx = config_.fewshot ? &index(run_dir) : nullptr;
    ExecOptions exec;
    exec.timeout_ms = config_.exec_timeout_ms;
    exec.timing = config_.timing;
    exec.semantics = config_.result_semantics;

    std::atomic<int> errors{0}, skipped{0}, unparseable{0}, multi{0}, empty{0}, fenced{0}, masking_fallbacks{0};
    for_each_example(examples, config_.workers, [&](const BenchmarkExample& ex) {
        const auto out_path = artifact(run_dir, "generate", ex.example_id);
        if (fs::exists(out_path)) {
            ++skipped;
            return;
        }
        json doc{{"example_id", ex.example_id}, {"db_id", ex.db_id}};
        json link_doc = read_json_file(artifact(run_dir, "link", ex.example_id));
        if (link_doc.at("linked").is_null()) {
            doc["error"] = "no linked schema";
            doc["error_kind"] = "linking";
            doc["candidates"] = json::array();
            doc["outcomes"] = json::array();
            ++errors;
            write_json_atomic(out_path, doc);
            return;
        }
        const auto linked = linked_schema_from_json(link_doc.at("linked"));
        const auto& schema = benchmark().schema(ex.db_id);
        const auto& db_path = benchmark().database_path(ex.db_id);
        try {
            std::vector<FewShotList> variants;
            if (idx) {
                auto query = embed_query(*gateway_, ex, schema);
                if (query.masking.fell_back) ++masking_fallbacks;
                doc["masked_question"] = query.masking.masked;
                doc["masking_fell_back"] = query.masking.fell_back;
                variants = make_prompt_variants(*idx, ex, query, config_.k, config_.p_q);
            } else {
                // Without examples every variant would be the same prompt.
                variants.push_back(FewShotList{0, {}});
            }
            json variants_json = json::array();
            for (const auto& v : variants) variants_json.push_back(to_json(v));
            doc["fewshot"] = std::move(variants_json);

            Database db(db_path);
            PromptContext context{&schema, &linked, &db, &ex, config_.sample_rows};
            auto result = generate_candidates(*gateway_, context, variants, config_);
            unparseable += result.dropped_unparseable;
            multi += result.dropped_multi_statement;
            empty += result.dropped_empty;
            fenced += result.salvaged_from_fence;
            json candidates = json::array();
            json outcomes = json::array();
            for (const auto& c : result.candidates) {
                candidates.push_back(to_json(c));
                outcomes.push_back(outcome_to_json(execute(db_path, c.sql, exec)));
            }
            doc["candidates"] = std::move(candidates);
            doc["outcomes"] = std::move(outcomes);
            doc["prompts"] = result.prompts;
            doc["dropped"] = {{"unparseable", result.dropped_unparseable},
                              {"multi_statement", result.dropped_multi_statement},
                              {"empty", result.dropped_empty},
                              {"salvaged_from_fence", result.salvaged_from_fence}};
        } catch (const Error& e) {
            if (dynamic_cast<const ConfigError*>(&e)) throw;
            record_error(doc, e);
            doc["candidates"] = json::array();
            doc["outcomes"] = json::array();
            ++errors;
        }
        write_json_atomic(out_path, doc);
    });
    mark_stage(run_dir, Stage::generate,
               {{"examples", examples.size()},
                {"errors", errors.load()},
                {"resumed", skipped.load()},
                {"masking_fallbacks", masking_fallbacks.load()},
                {"dropped_unparseable", unparseable.load()},
                {"dropped_multi_statement", multi.load()},
                {"dropped_empty", empty.load()},
                {"salvaged_from_fence", fenced.load()}});
}

void Pipeline::stage_select(const fs::path& run_dir, const StageOptions& options) {
    const auto examples = selected_examples();
    for (const auto* ex : examples) {
        if (!fs::exists(artifact(run_dir, "generate", ex->example_id))) {
            throw StageError(
                fmt::format("select needs generate/{}.json; run the generate stage first", ex->example_id));
        }
    }
    const std::string dir = with_variant("select", options);
    std::atomic<int> errors{0}, skipped{0}, empty_pool{0}, no_vote{0}, single{0}, below{0};
    for_each_example(examples, config_.workers, [&](const BenchmarkExample& ex) {
        const auto out_path = artifact(run_dir, dir, ex.example_id);
        if (fs::exists(out_path)) {
            ++skipped;
            return;
        }
        json gen = read_json_file(artifact(run_dir, "generate", ex.example_id));
        json link_doc = read_json_file(artifact(run_dir, "link", ex.example_id));
        std::vector<CandidateQuery> candidates;
        std::vector<ExecutionOutcome> outcomes;
        for (const auto& c : gen.at("candidates")) candidates.push_back(candidate_from_json(c));
        for (const auto& o : gen.at("outcomes")) outcomes.push_back(outcome_from_json(o));
        FewShotList fewshot;
        if (gen.contains("fewshot") && !gen.at("fewshot").empty()) {
            fewshot = fewshot_list_from_json(gen.at("fewshot").front());
        }

        const auto& schema = benchmark().schema(ex.db_id);
        std::optional<LinkedSchema> linked;
        if (!link_doc.at("linked").is_null()) linked = linked_schema_from_json(link_doc.at("linked"));
        json doc;
        try {
            std::optional<Database> db;
            if (!candidates.empty()) db.emplace(benchmark().database_path(ex.db_id));
            PromptContext context{&schema, linked ? &*linked : nullptr, db ? &*db : nullptr, &ex,
                                  config_.sample_rows};
            auto result = run_selection(gateway_.get(), candidates, outcomes, context, fewshot, config_, ex.example_id);
            doc = to_json(result);
            if (result.fallback_reason) {
                switch (*result.fallback_reason) {
                    case FallbackReason::empty_pool: ++empty_pool; break;
                    case FallbackReason::no_vote_match: ++no_vote; break;
                    case FallbackReason::single_candidate: ++single; break;
                    case FallbackReason::below_threshold_fallback: ++below; break;
                }
            }
        } catch (const Error& e) {
            if (dynamic_cast<const ConfigError*>(&e)) throw;
            doc = json{{"final_sql", nullptr}};
            record_error(doc, e);
            ++errors;
        }
        doc["example_id"] = ex.example_id;
        write_json_atomic(out_path, doc);
    });

    // Predictions cover the whole split so official scorers can consume them.
    json bird = json::object();
    std::string spider;
    for (const auto& ex : benchmark().examples) {
        const auto path = artifact(run_dir, dir, ex.example_id);
        std::string sql;
        if (fs::exists(path)) {
            auto doc = read_json_file(path);
            if (doc.contains("final_sql") && doc.at("final_sql").is_string()) sql = doc.at("final_sql").get<std::string>();
        }
        bird[ex.example_id] = fmt::format("{}{}{}", sql, kBirdSeparator, ex.db_id);
        spider += collapse_whitespace(sql) + "\n";
    }
    write_json_atomic(run_dir / (with_variant("predictions", options) + ".json"), bird);
    write_file_atomic(run_dir / (with_variant("predictions", options) + ".sql"), spider);

    json counters{{"examples", examples.size()},
                  {"errors", errors.load()},
                  {"resumed", skipped.load()},
                  {"empty_pool", empty_pool.load()},
                  {"no_vote_match", no_vote.load()},
                  {"single_candidate", single.load()},
                  {"below_threshold_fallback", below.load()},
                  {"variant", options.variant}};
    if (!options.variant.empty()) counters["config"] = config_.to_json();
    mark_stage(run_dir, Stage::select, counters);
}

EvalReport Pipeline::stage_eval(const fs::path& run_dir, const StageOptions& options) {
    const auto pred_path = run_dir / (with_variant("predictions", options) + ".json");
    if (!fs::exists(pred_path)) {
        throw StageError(fmt::format("eval needs {}; run the select stage first", pred_path.filename().string()));
    }
    auto predictions = read_predictions(pred_path);
    const auto selected = selected_examples();
    std::vector<BenchmarkExample> examples;
    for (const auto* ex : selected) examples.push_back(*ex);

    std::map<std::string, LinkedSchema> linked;
    bool have_links = config_.schema_linking;
    for (const auto& ex : examples) {
        const auto path = artifact(run_dir, "link", ex.example_id);
        if (!fs::exists(path)) {
            have_links = false;
            break;
        }
        auto doc = read_json_file(path);
        if (!doc.at("linked").is_null()) linked[ex.example_id] = linked_schema_from_json(doc.at("linked"));
        else linked[ex.example_id] = LinkedSchema{ex.db_id, {}};
    }

    auto report = evaluate(predictions, examples, benchmark(), eval_options_from(config_), have_links ? &linked : nullptr);
    const auto dir = run_dir / with_variant("eval", options);
    write_json_atomic(dir / "report.json", to_json(report));
    write_file_atomic(dir / "report.txt", render_report_table(report));
    write_file_atomic(dir / "verdicts.csv", render_verdicts_csv(report));
    mark_stage(run_dir, Stage::eval,
               {{"examples", examples.size()},
                {"ex", report.ex.overall},
                {"ves", report.ves},
                {"variant", options.variant}});
    return report;
}

std::size_t Pipeline::count_fixture_misses(const fs::path& run_dir, const StageOptions& options) {
    std::size_t misses = 0;
    for (const auto* ex : selected_examples()) {
        for (const auto& dir : {std::string("link"), std::string("generate"), with_variant("select", options)}) {
            const auto path = artifact(run_dir, dir, ex->example_id);
            if (!fs::exists(path)) continue;
            if (read_json_file(path).value("error_kind", "") == "fixture_missing") {
                ++misses;
                break;
            }
        }
    }
    return misses;
}

RunSummary Pipeline::run(const fs::path& run_dir) {
    init_manifest(run_dir, true);
    const auto manifest = read_json_file(run_dir / "manifest.json");
    auto completed = [&](Stage s) {
        const auto& stages = manifest.at("stages");
        const std::string key(to_string(s));
        return stages.contains(key) && stages.at(key).value("completed", false);
    };
    const StageOptions defaults;
    if (!completed(Stage::link)) stage_link(run_dir);
    if (!completed(Stage::generate)) stage_generate(run_dir);
    if (!completed(Stage::select)) stage_select(run_dir, defaults);

    RunSummary summary;
    summary.run_dir = run_dir;
    summary.report = stage_eval(run_dir, defaults);
    summary.examples = summary.report->ex.total;
    summary.unanswered = summary.report->ex.unanswered;
    summary.fixture_misses = count_fixture_misses(run_dir, defaults);
    const double pct = summary.examples == 0
                           ? 0.0
                           : 100.0 * static_cast<double>(summary.unanswered) / static_cast<double>(summary.examples);
    if (pct > config_.max_unanswered_pct) {
        spdlog::error("{:.1f}% of examples unanswered, above the {:.1f}% budget", pct, config_.max_unanswered_pct);
        summary.exit_code = kExitBackend;
    }
    return summary;
}

void Pipeline::run_stage(Stage stage, const fs::path& run_dir, const StageOptions& options) {
    init_manifest(run_dir, false);
    switch (stage) {
        case Stage::link: stage_link(run_dir); break;
        case Stage::generate: stage_generate(run_dir); break;
        case Stage::select: stage_select(run_dir, options); break;
        case Stage::eval: stage_eval(run_dir, options); break;
    }
}

EvalReport Pipeline::evaluate_run(const fs::path& run_dir, const StageOptions& options) {
    init_manifest(run_dir, false);
    return stage_eval(run_dir, options);
}

// ---------------------------------------------------------------------------
// Ablations

std::vector<AblationRow> ablation_run(const RunConfig& base, const std::vector<AblationSpec>& specs,
                                      const fs::path& runs_root, std::shared_ptr<LlmBackend> backend) {
    std::vector<AblationRow> rows;
    for (const auto& spec : specs) {
        AblationRow row;
        row.name = spec.name;
        try {
            RunConfig config = base;
            if (!spec.overrides.is_null()) apply_config_json(config, spec.overrides);
            Pipeline pipeline(config, backend);
            auto summary = pipeline.run(runs_root / spec.name);
            if (summary.fixture_misses > 0) {
                row.error = fmt::format("{} example(s) hit missing replay fixtures", summary.fixture_misses);
            } else {
                row.ex = summary.report->ex;
            }
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string render_ablation_table(const std::vector<AblationRow>& rows) {
    std::size_t width = 13;
    for (const auto& r : rows) width = std::max(width, r.name.size());
    std::string out = fmt::format("{:<{}}  {:>8}  {:>8}\n", "configuration", width, "EX", "delta");
    std::optional<double> baseline;
    for (const auto& r : rows) {
        if (!r.ex) {
            out += fmt::format("{:<{}}  {:>8}  {:>8}  {}\n", r.name, width, "-", "-", r.error);
            continue;
        }
        if (!baseline) baseline = r.ex->overall;
        out += fmt::format("{:<{}}  {:>8.2f}  {:>+8.2f}\n", r.name, width, r.ex->overall, r.ex->overall - *baseline);
    }
    return out;
}

}  // namespace mcsql
