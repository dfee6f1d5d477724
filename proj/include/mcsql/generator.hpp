#pragma once

#include "mcsql/bench_data.hpp"
#include "mcsql/config.hpp"
#include "mcsql/fewshot.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace mcsql {

class Database;
class Gateway;

struct CandidateQuery {
    std::string sql;
    int prompt_index = 0;
    int sample_index = 0;
    std::string reasoning;
};

nlohmann::json to_json(const CandidateQuery& c);
CandidateQuery candidate_from_json(const nlohmann::json& j);

// Shared body of the generation and selection prompts: few-shot block,
// schema, column docs, CSV samples, question and evidence.
struct PromptContext {
    const DbSchema* schema = nullptr;
    const LinkedSchema* linked = nullptr;
    const Database* db = nullptr;
    const BenchmarkExample* example = nullptr;
    int sample_rows = 3;
};

std::string render_fewshot_block(const FewShotList& fewshot);
std::string render_context_block(const PromptContext& context);
std::string render_question_block(const BenchmarkExample& example);

std::string build_generation_prompt(const PromptContext& context, const FewShotList& fewshot);

struct GenerationResult {
    std::vector<CandidateQuery> candidates;
    std::vector<std::string> prompts;
    int dropped_unparseable = 0;
    int dropped_empty = 0;
    int dropped_multi_statement = 0;
    int salvaged_from_fence = 0;
};

// Trims, strips trailing semicolons; nullopt for empty or multi-statement text.
std::optional<std::string> normalize_candidate_sql(std::string_view sql, bool* multi_statement);

// Pulls `sql` (and `reasoning`) out of one completion, falling back to a sole
// fenced code block. nullopt when neither works.
struct ExtractedSql {
    std::string sql;
    std::string reasoning;
    bool from_fence = false;
};
std::optional<ExtractedSql> extract_sql_answer(std::string_view completion);

// One request per few-shot variant. Throws GenerationError when every sample
// of every prompt was dropped.
GenerationResult generate_candidates(Gateway& gateway, const PromptContext& context,
                                     const std::vector<FewShotList>& variants,
                                     const RunConfig& config);

}  // namespace mcsql
