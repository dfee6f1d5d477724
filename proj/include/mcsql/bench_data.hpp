#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mcsql {

class Database;

struct ColumnDef {
    std::string name;
    std::string declared_type;
    std::string description;
};

struct TableDef {
    std::string name;
    std::vector<ColumnDef> columns;

    const ColumnDef* find_column(std::string_view column) const;
};

struct ColumnRef {
    std::string table;
    std::string column;

    auto operator<=>(const ColumnRef&) const = default;
};

struct ForeignKey {
    ColumnRef from;
    ColumnRef to;
};

struct DbSchema {
    std::string db_id;
    std::vector<TableDef> tables;
    std::vector<ForeignKey> foreign_keys;

    // Case-insensitive lookups returning the schema's own spelling.
    const TableDef* find_table(std::string_view table) const;
    std::optional<ColumnRef> resolve_column(std::string_view table, std::string_view column) const;

    // Throws LoadError when an invariant does not hold.
    void validate() const;
};

enum class Difficulty { simple, moderate, challenging, easy, medium, hard, extra_hard, unknown };

std::string_view to_string(Difficulty d);
Difficulty parse_difficulty(std::string_view text);

struct BenchmarkExample {
    std::string example_id;
    std::string db_id;
    std::string question;
    std::optional<std::string> evidence;
    std::string gold_sql;
    Difficulty difficulty = Difficulty::unknown;
};

// Tables and columns retained by schema linking, in canonical schema spelling.
// Column lists follow schema declaration order.
struct LinkedSchema {
    std::string db_id;
    std::map<std::string, std::vector<std::string>> tables;

    bool has_table(std::string_view table) const;
    bool has_column(std::string_view table, std::string_view column) const;

    // Every table and column of `schema`.
    static LinkedSchema full(const DbSchema& schema);
    // Throws Error when not a valid subset of `schema`.
    void validate_against(const DbSchema& schema) const;
};

enum class Split { train, dev, test };

std::string_view to_string(Split s);
Split parse_split(std::string_view text);

struct Benchmark {
    std::filesystem::path root;
    std::vector<BenchmarkExample> examples;
    std::map<std::string, DbSchema> schemas;
    std::map<std::string, std::filesystem::path> database_paths;

    const DbSchema& schema(std::string_view db_id) const;
    const std::filesystem::path& database_path(std::string_view db_id) const;
};

// Reads a Spider/BIRD style layout:
//   <root>/<split>.json                                examples
//   <root>/<split>_tables.json | <root>/tables.json    schemas
//   <root>/<split>_databases/<db>/<db>.sqlite | <root>/database/<db>/<db>.sqlite
//   <db dir>/database_description/<table>.csv          optional BIRD column docs
Benchmark load_benchmark(const std::filesystem::path& root, Split split);

struct RenderOptions {
    // nullopt keeps declaration order.
    std::optional<std::uint64_t> order_seed;
    bool shuffle_columns = false;
    bool with_types = false;
    bool with_foreign_keys = true;
};

// `# table ( col, col )` lines, then `#` and `# t1.c1 = t2.c2` lines for the
// foreign keys whose endpoints both survive `linked`.
std::string render_schema(const DbSchema& schema, const LinkedSchema* linked,
                          const RenderOptions& options);
std::string render_schema(const DbSchema& schema, const LinkedSchema* linked,
                          std::uint64_t order_seed);

// `# [table]` followed by `- col (type): description` per linked column.
std::string render_column_descriptions(const DbSchema& schema, const LinkedSchema& linked);

std::string sample_table_csv(const Database& db, std::string_view table, int max_rows,
                             const std::vector<std::string>& columns = {});

struct GoldIdentifiers {
    std::set<std::string> tables;
    std::set<std::string> columns;  // "table.column", lower case
};

// Best-effort identifier extraction over a token stream; lower-cased names.
GoldIdentifiers extract_gold_identifiers(std::string_view sql, const DbSchema& schema);

}  // namespace mcsql
