#pragma once

#include "mcsql/bench_data.hpp"
#include "mcsql/config.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mcsql {

class Gateway;

enum class LinkStage { table, column };

struct LinkingTrace {
    LinkStage stage = LinkStage::table;
    int prompt_index = 0;
    std::uint64_t permutation_seed = 0;
    // One entry per parsed response, canonical names ("table" or "table.column").
    std::vector<std::vector<std::string>> answers;
    std::vector<std::string> dropped_names;
    int unparseable = 0;
    // Tables that fell back to "everything" because the union came up empty.
    std::vector<std::string> fallbacks;
};

nlohmann::json to_json(const LinkingTrace& trace);
LinkingTrace linking_trace_from_json(const nlohmann::json& j);

std::string build_table_prompt(const DbSchema& schema, std::string_view question,
                               const std::optional<std::string>& evidence,
                               std::uint64_t permutation_seed);

std::string build_column_prompt(const DbSchema& schema, const std::set<std::string>& linked_tables,
                                std::string_view question,
                                const std::optional<std::string>& evidence,
                                std::uint64_t permutation_seed);

struct TableLinkResult {
    std::set<std::string> tables;
    std::vector<LinkingTrace> traces;
};

struct ColumnLinkResult {
    LinkedSchema linked;
    std::vector<LinkingTrace> traces;
};

// Maps a model answer onto a schema table; nullopt when it is not one.
std::optional<std::string> canonical_table(const DbSchema& schema, std::string_view name);
// Accepts "t.c", "[t].[c]", "`t`.`c`" and quoted variants.
std::optional<ColumnRef> canonical_column(const DbSchema& schema, std::string_view name);

// Union over p_t prompts x n samples. Throws LinkingError when no sample parsed.
TableLinkResult link_tables(Gateway& gateway, const BenchmarkExample& example,
                            const DbSchema& schema, const RunConfig& config);

// Union restricted to linked_tables, foreign keys between linked tables forced
// in, empty tables widened to all columns. Throws LinkingError when no sample
// parsed.
ColumnLinkResult link_columns(Gateway& gateway, const BenchmarkExample& example,
                              const DbSchema& schema, const std::set<std::string>& linked_tables,
                              const RunConfig& config);

// Pure aggregation halves of the two stages, reused by tests and reruns.
std::set<std::string> union_tables(const std::vector<LinkingTrace>& traces,
                                   const DbSchema& schema);
LinkedSchema union_columns(const std::vector<LinkingTrace>& traces, const DbSchema& schema,
                           const std::set<std::string>& linked_tables,
                           std::vector<std::string>* widened_tables = nullptr);

nlohmann::json to_json(const LinkedSchema& linked);
LinkedSchema linked_schema_from_json(const nlohmann::json& j);

}  // namespace mcsql
