#include "mcsql/generator.hpp"

#include "mcsql/common.hpp"
#include "mcsql/executor.hpp"
#include "mcsql/llm_gateway.hpp"
#include "mcsql/sqlite_db.hpp"

#include <fmt/format.h>

namespace mcsql {

using nlohmann::json;

json to_json(const CandidateQuery& c) {
    return json{{"sql", c.sql},
                {"prompt_index", c.prompt_index},
                {"sample_index", c.sample_index},
                {"reasoning", c.reasoning}};
}

CandidateQuery candidate_from_json(const json& j) {
    CandidateQuery c;
    c.sql = j.at("sql").get<std::string>();
    c.prompt_index = j.at("prompt_index").get<int>();
    c.sample_index = j.at("sample_index").get<int>();
    c.reasoning = j.value("reasoning", "");
    return c;
}

std::string render_fewshot_block(const FewShotList& fewshot) {
    if (fewshot.items.empty()) return {};
    std::string out = "<examples>\n";
    for (const auto& item : fewshot.items) {
        out += fmt::format("# Question: {}\n", item.question);
        if (item.evidence) out += fmt::format("# Knowledge Evidence: {}\n", *item.evidence);
        out += fmt::format("# Gold SQL: {}\n\n", item.gold_sql);
    }
    out += "</examples>\n\n\n";
    return out;
}

std::string render_context_block(const PromptContext& context) {
    if (!context.schema) throw GenerationError("prompt context has no schema");
    const DbSchema& schema = *context.schema;
    std::optional<LinkedSchema> full;
    const LinkedSchema* linked = context.linked;
    if (!linked) {
        full = LinkedSchema::full(schema);
        linked = &*full;
    }

    std::string out = "### SQLite SQL tables, with their properties:\n";
    out += render_schema(schema, linked, RenderOptions{});
    out += "\n### The type and description of each column:\n";
    out += render_column_descriptions(schema, *linked);
    out += "\n### Sample rows of each table in csv format:\n";
    bool first = true;
    for (const auto& table : schema.tables) {
        auto it = linked->tables.find(table.name);
        if (it == linked->tables.end()) continue;
        if (!first) out += "\n";
        first = false;
        out += fmt::format("# [{}]\n", table.name);
        if (context.db && context.sample_rows > 0) {
            out += sample_table_csv(*context.db, table.name, context.sample_rows, it->second);
        }
    }
    out += "\n\n\n";
    return out;
}

std::string render_question_block(const BenchmarkExample& example) {
    std::string out = fmt::format("### Question: {}\n", example.question);
    if (example.evidence) out += fmt::format("### Knowledge Evidence: {}\n", *example.evidence);
    return out;
}

std::string build_generation_prompt(const PromptContext& context, const FewShotList& fewshot) {
    if (!context.example) throw GenerationError("prompt context has no example");
    std::string p =
        "### Given a database schema, question, and knowledge evidence, generate the correct sqlite "
        "SQL query for the question.\n\n";
    p += render_fewshot_block(fewshot);
    p += render_context_block(context);
    p += render_question_block(*context.example);
    p += "\n";
    p += "You need to not only create the SQL, but also provide the detailed reasoning steps required "
         "to create the SQL. Your answer should strictly follow the following json format:\n";
    p += "{\n";
    p += "  \"reasoning\": \"\",  // The reasoning steps for generating SQL.\n";
    p += "  \"sql\": \"\",  // The final generated SQL.\n";
    p += "}\n\n";
    p += "### Your Answer:";
    return p;
}

std::optional<std::string> normalize_candidate_sql(std::string_view sql, bool* multi_statement) {
    if (multi_statement) *multi_statement = false;
    std::string s = trim(sql);
    while (!s.empty() && s.back() == ';') s = trim(std::string_view(s).substr(0, s.size() - 1));
    if (s.empty()) return std::nullopt;
    if (!is_single_statement(s)) {
        if (multi_statement) *multi_statement = true;
        return std::nullopt;
    }
    return s;
}

namespace {

// Body of the only fenced block in `text`, if there is exactly one.
std::optional<std::string> sole_fenced_block(std::string_view text) {
    std::vector<std::string> blocks;
    std::size_t pos = 0;
    while ((pos = text.find("```", pos)) != std::string_view::npos) {
        auto body_start = text.find('\n', pos + 3);
        if (body_start == std::string_view::npos) break;
        auto close = text.find("```", body_start + 1);
        if (close == std::string_view::npos) break;
        blocks.emplace_back(text.substr(body_start + 1, close - body_start - 1));
        pos = close + 3;
    }
    if (blocks.size() != 1) return std::nullopt;
    return blocks.front();
}

}  // namespace

std::optional<ExtractedSql> extract_sql_answer(std::string_view completion) {
    static const std::vector<std::string> kRequired = {"sql"};
    try {
        json answer = parse_json_answer(completion, kRequired);
        if (answer.at("sql").is_string()) {
            ExtractedSql out;
            out.sql = answer.at("sql").get<std::string>();
            if (answer.contains("reasoning") && answer.at("reasoning").is_string()) {
                out.reasoning = answer.at("reasoning").get<std::string>();
            }
            return out;
        }
    } catch (const ParseError&) {
    }
    if (auto block = sole_fenced_block(completion)) {
        return ExtractedSql{*block, "", true};
    }
    return std::nullopt;
}

GenerationResult generate_candidates(Gateway& gateway, const PromptContext& context,
                                     const std::vector<FewShotList>& variants,
                                     const RunConfig& config) {
    if (!context.example) throw GenerationError("prompt context has no example");
    if (variants.empty()) throw GenerationError("no prompt variants to generate from");
    GenerationResult result;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        LlmRequest request;
        request.prompt = build_generation_prompt(context, variants[v]);
        request.n = config.n;
        request.temperature = config.temperature;
        request.max_output_tokens = config.max_output_tokens;
        request.tag = fmt::format("generate/{}/{}", context.example->example_id, v);
        auto completions = gateway.complete(request);
        result.prompts.push_back(std::move(request.prompt));

        for (std::size_t s = 0; s < completions.size(); ++s) {
            auto extracted = extract_sql_answer(completions[s].raw_text);
            if (!extracted) {
                ++result.dropped_unparseable;
                continue;
            }
            bool multi = false;
            auto sql = normalize_candidate_sql(extracted->sql, &multi);
            if (!sql) {
                ++(multi ? result.dropped_multi_statement : result.dropped_empty);
                continue;
            }
            if (extracted->from_fence) ++result.salvaged_from_fence;
            result.candidates.push_back(CandidateQuery{*sql, static_cast<int>(v), static_cast<int>(s),
                                                       std::move(extracted->reasoning)});
        }
    }
    if (result.candidates.empty()) {
        throw GenerationError(fmt::format("no usable candidate for {}", context.example->example_id));
    }
    return result;
}

}  // namespace mcsql
