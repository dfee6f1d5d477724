#include "mcsql/bench_data.hpp"

#include "mcsql/common.hpp"
#include "mcsql/sqlite_db.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace mcsql {

namespace fs = std::filesystem;
using nlohmann::json;

const ColumnDef* TableDef::find_column(std::string_view column) const {
    for (const auto& c : columns) {
        if (iequals(c.name, column)) return &c;
    }
    return nullptr;
}

const TableDef* DbSchema::find_table(std::string_view table) const {
    for (const auto& t : tables) {
        if (iequals(t.name, table)) return &t;
    }
    return nullptr;
}

std::optional<ColumnRef> DbSchema::resolve_column(std::string_view table,
                                                  std::string_view column) const {
    const TableDef* t = find_table(table);
    if (!t) return std::nullopt;
    const ColumnDef* c = t->find_column(column);
    if (!c) return std::nullopt;
    return ColumnRef{t->name, c->name};
}

void DbSchema::validate() const {
    std::set<std::string> seen_tables;
    for (const auto& t : tables) {
        if (!seen_tables.insert(to_lower(t.name)).second) {
            throw LoadError(fmt::format("{}: duplicate table '{}'", db_id, t.name));
        }
        if (t.columns.empty()) {
            throw LoadError(fmt::format("{}: table '{}' has no columns", db_id, t.name));
        }
        std::set<std::string> seen_cols;
        for (const auto& c : t.columns) {
            if (c.name.empty()) {
                throw LoadError(fmt::format("{}: empty column name in '{}'", db_id, t.name));
            }
            if (!seen_cols.insert(to_lower(c.name)).second) {
                throw LoadError(
                    fmt::format("{}: duplicate column '{}' in '{}'", db_id, c.name, t.name));
            }
        }
    }
    for (const auto& fk : foreign_keys) {
        for (const auto* ref : {&fk.from, &fk.to}) {
            if (!resolve_column(ref->table, ref->column)) {
                throw LoadError(fmt::format("{}: foreign key endpoint {}.{} does not exist", db_id,
                                            ref->table, ref->column));
            }
        }
    }
}

std::string_view to_string(Difficulty d) {
    switch (d) {
        case Difficulty::simple: return "simple";
        case Difficulty::moderate: return "moderate";
        case Difficulty::challenging: return "challenging";
        case Difficulty::easy: return "easy";
        case Difficulty::medium: return "medium";
        case Difficulty::hard: return "hard";
        case Difficulty::extra_hard: return "extra_hard";
        case Difficulty::unknown: return "unknown";
    }
    return "unknown";
}

Difficulty parse_difficulty(std::string_view text) {
    std::string t = to_lower(trim(text));
    std::replace(t.begin(), t.end(), ' ', '_');
    std::replace(t.begin(), t.end(), '-', '_');
    if (t == "simple") return Difficulty::simple;
    if (t == "moderate") return Difficulty::moderate;
    if (t == "challenging") return Difficulty::challenging;
    if (t == "easy") return Difficulty::easy;
    if (t == "medium") return Difficulty::medium;
    if (t == "hard") return Difficulty::hard;
    if (t == "extra_hard" || t == "extra") return Difficulty::extra_hard;
    return Difficulty::unknown;
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    return "dev";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "dev") return Split::dev;
    if (text == "test") return Split::test;
    throw ConfigError(fmt::format("unknown split '{}'", text));
}

bool LinkedSchema::has_table(std::string_view table) const {
    return std::any_of(tables.begin(), tables.end(),
                       [&](const auto& kv) { return iequals(kv.first, table); });
}

bool LinkedSchema::has_column(std::string_view table, std::string_view column) const {
    for (const auto& [t, cols] : tables) {
        if (!iequals(t, table)) continue;
        return std::any_of(cols.begin(), cols.end(),
                           [&](const std::string& c) { return iequals(c, column); });
    }
    return false;
}

LinkedSchema LinkedSchema::full(const DbSchema& schema) {
    LinkedSchema out;
    out.db_id = schema.db_id;
    for (const auto& t : schema.tables) {
        auto& cols = out.tables[t.name];
        for (const auto& c : t.columns) cols.push_back(c.name);
    }
    return out;
}

void LinkedSchema::validate_against(const DbSchema& schema) const {
    for (const auto& [t, cols] : tables) {
        const TableDef* def = schema.find_table(t);
        if (!def) throw Error(fmt::format("linked table '{}' not in schema {}", t, schema.db_id));
        for (const auto& c : cols) {
            if (!def->find_column(c)) {
                throw Error(fmt::format("linked column '{}.{}' not in schema {}", t, c,
                                        schema.db_id));
            }
        }
    }
}

const DbSchema& Benchmark::schema(std::string_view db_id) const {
    auto it = schemas.find(std::string(db_id));
    if (it == schemas.end()) throw LoadError(fmt::format("unknown db_id '{}'", db_id));
    return it->second;
}

const fs::path& Benchmark::database_path(std::string_view db_id) const {
    auto it = database_paths.find(std::string(db_id));
    if (it == database_paths.end()) {
        throw LoadError(fmt::format("no database file for db_id '{}'", db_id));
    }
    return it->second;
}

// ---------------------------------------------------------------------------
// Loading

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json_file(const fs::path& path) {
    std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(fmt::format("{}: malformed JSON at byte offset {}: {}", path.string(),
                                     e.byte, e.what()),
                         text.substr(e.byte > 40 ? e.byte - 40 : 0, 80));
    }
}

std::optional<fs::path> first_existing(std::initializer_list<fs::path> candidates) {
    for (const auto& p : candidates) {
        if (fs::exists(p)) return p;
    }
    return std::nullopt;
}

// RFC 4180 records; tolerates a UTF-8 BOM and CRLF.
std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        any = true;
        if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            record.push_back(std::move(field));
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            record.push_back(std::move(field));
            field.clear();
            records.push_back(std::move(record));
            record.clear();
            any = false;
        } else {
            field.push_back(c);
        }
    }
    if (any || !field.empty() || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

void load_descriptions(const fs::path& db_dir, DbSchema& schema) {
    fs::path dir = db_dir / "database_description";
    if (!fs::is_directory(dir)) return;
    for (auto& table : schema.tables) {
        auto file = first_existing({dir / (table.name + ".csv"), dir / (to_lower(table.name) + ".csv")});
        if (!file) continue;
        auto records = parse_csv(read_file(*file));
        if (records.empty()) continue;
        const auto& header = records.front();
        auto col_of = [&](std::string_view name) -> std::optional<std::size_t> {
            for (std::size_t i = 0; i < header.size(); ++i) {
                if (iequals(trim(header[i]), name)) return i;
            }
            return std::nullopt;
        };
        auto name_col = col_of("original_column_name");
        auto desc_col = col_of("column_description");
        auto alt_col = col_of("column_name");
        if (!name_col) continue;
        for (std::size_t r = 1; r < records.size(); ++r) {
            const auto& rec = records[r];
            if (*name_col >= rec.size()) continue;
            const std::string wanted = trim(rec[*name_col]);
            auto col = std::find_if(table.columns.begin(), table.columns.end(),
                                    [&](const ColumnDef& c) { return iequals(c.name, wanted); });
            if (col == table.columns.end()) continue;
            std::string desc;
            if (desc_col && *desc_col < rec.size()) desc = trim(rec[*desc_col]);
            if (desc.empty() && alt_col && *alt_col < rec.size()) desc = trim(rec[*alt_col]);
            col->description = collapse_whitespace(desc);
        }
    }
}

DbSchema parse_schema_entry(const json& entry, const fs::path& file) {
    DbSchema schema;
    try {
        schema.db_id = entry.at("db_id").get<std::string>();
        const auto& table_names = entry.contains("table_names_original")
                                      ? entry.at("table_names_original")
                                      : entry.at("table_names");
        const auto& column_names = entry.contains("column_names_original")
                                       ? entry.at("column_names_original")
                                       : entry.at("column_names");
        const json empty = json::array();
        const auto& types = entry.contains("column_types") ? entry.at("column_types") : empty;

        for (const auto& t : table_names) schema.tables.push_back(TableDef{t.get<std::string>(), {}});
        // Global column index -> (table index, position) for foreign keys.
        std::vector<std::optional<std::pair<std::size_t, std::size_t>>> by_index;
        for (std::size_t i = 0; i < column_names.size(); ++i) {
            int table_idx = column_names[i].at(0).get<int>();
            std::string name = column_names[i].at(1).get<std::string>();
            if (table_idx < 0 || static_cast<std::size_t>(table_idx) >= schema.tables.size()) {
                by_index.emplace_back(std::nullopt);
                continue;
            }
            auto& table = schema.tables[static_cast<std::size_t>(table_idx)];
            std::string type = i < types.size() ? types[i].get<std::string>() : "";
            by_index.emplace_back(std::pair{static_cast<std::size_t>(table_idx), table.columns.size()});
            table.columns.push_back(ColumnDef{name, type, ""});
        }
        if (entry.contains("foreign_keys")) {
            for (const auto& fk : entry.at("foreign_keys")) {
                auto a = fk.at(0).get<std::size_t>();
                auto b = fk.at(1).get<std::size_t>();
                if (a >= by_index.size() || b >= by_index.size() || !by_index[a] || !by_index[b]) {
                    throw LoadError(fmt::format("{}: foreign key index out of range in {}",
                                                schema.db_id, file.string()));
                }
                auto ref = [&](std::size_t idx) {
                    auto [ti, ci] = *by_index[idx];
                    return ColumnRef{schema.tables[ti].name, schema.tables[ti].columns[ci].name};
                };
                schema.foreign_keys.push_back(ForeignKey{ref(a), ref(b)});
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("{}: bad schema entry: {}", file.string(), e.what()),
                         entry.dump().substr(0, 200));
    }
    return schema;
}

}  // namespace

Benchmark load_benchmark(const fs::path& root, Split split) {
    const std::string s(to_string(split));
    Benchmark bench;
    bench.root = root;

    auto examples_file = first_existing({root / (s + ".json"), root / (s + "_spider.json")});
    if (!examples_file) throw LoadError(fmt::format("no {}.json under {}", s, root.string()));
    auto tables_file = first_existing({root / (s + "_tables.json"), root / "tables.json"});
    if (!tables_file) throw LoadError("no tables metadata under " + root.string());
    auto db_root = first_existing({root / (s + "_databases"), root / "database", root / "databases"});

    json tables = parse_json_file(*tables_file);
    if (!tables.is_array()) {
        throw ParseError(tables_file->string() + ": expected a JSON array", tables.dump().substr(0, 80));
    }
    for (const auto& entry : tables) {
        DbSchema schema = parse_schema_entry(entry, *tables_file);
        if (db_root) {
            fs::path dir = *db_root / schema.db_id;
            auto file = first_existing({dir / (schema.db_id + ".sqlite"), dir / (schema.db_id + ".db")});
            if (file) bench.database_paths[schema.db_id] = *file;
            load_descriptions(dir, schema);
        }
        schema.validate();
        std::string id = schema.db_id;
        bench.schemas.emplace(id, std::move(schema));
    }

    json examples = parse_json_file(*examples_file);
    if (!examples.is_array()) {
        throw ParseError(examples_file->string() + ": expected a JSON array",
                         examples.dump().substr(0, 80));
    }
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& e = examples[i];
        BenchmarkExample ex;
        try {
            if (e.contains("question_id")) {
                const auto& q = e.at("question_id");
                ex.example_id = q.is_string() ? q.get<std::string>() : std::to_string(q.get<long long>());
            } else {
                ex.example_id = fmt::format("{}_{}", s, i);
            }
            ex.db_id = e.at("db_id").get<std::string>();
            ex.question = e.at("question").get<std::string>();
            if (e.contains("evidence") && e.at("evidence").is_string()) {
                std::string ev = trim(e.at("evidence").get<std::string>());
                if (!ev.empty()) ex.evidence = ev;
            }
            ex.gold_sql = trim(e.contains("SQL") ? e.at("SQL").get<std::string>()
                                                 : e.at("query").get<std::string>());
            if (e.contains("difficulty")) ex.difficulty = parse_difficulty(e.at("difficulty").get<std::string>());
            else if (e.contains("hardness")) ex.difficulty = parse_difficulty(e.at("hardness").get<std::string>());
        } catch (const json::exception& err) {
            throw ParseError(fmt::format("{}: example #{}: {}", examples_file->string(), i, err.what()),
                             e.dump().substr(0, 200));
        }
        if (ex.gold_sql.empty()) {
            throw LoadError(fmt::format("{}: example {} has empty gold SQL", examples_file->string(),
                                        ex.example_id));
        }
        if (!bench.schemas.contains(ex.db_id)) {
            throw LoadError(fmt::format("example {} references unknown db_id '{}'", ex.example_id, ex.db_id));
        }
        if (!bench.database_paths.contains(ex.db_id)) {
            throw LoadError(fmt::format("missing database file for db_id '{}'", ex.db_id));
        }
        bench.examples.push_back(std::move(ex));
    }
    return bench;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::vector<const TableDef*> retained_tables(const DbSchema& schema, const LinkedSchema* linked) {
    std::vector<const TableDef*> out;
    for (const auto& t : schema.tables) {
        if (!linked || linked->has_table(t.name)) out.push_back(&t);
    }
    return out;
}

std::vector<const ColumnDef*> retained_columns(const TableDef& table, const LinkedSchema* linked) {
    std::vector<const ColumnDef*> out;
    for (const auto& c : table.columns) {
        if (!linked || linked->has_column(table.name, c.name)) out.push_back(&c);
    }
    return out;
}

template <typename T>
std::vector<T> permuted(const std::vector<T>& items, std::uint64_t seed) {
    auto order = permutation(items.size(), seed);
    std::vector<T> out;
    out.reserve(items.size());
    for (auto i : order) out.push_back(items[i]);
    return out;
}

}  // namespace

std::string render_schema(const DbSchema& schema, const LinkedSchema* linked,
                          const RenderOptions& options) {
    auto tables = retained_tables(schema, linked);
    if (options.order_seed) tables = permuted(tables, *options.order_seed);

    std::string out;
    for (std::size_t ti = 0; ti < tables.size(); ++ti) {
        const TableDef* t = tables[ti];
        auto cols = retained_columns(*t, linked);
        if (options.order_seed && options.shuffle_columns) {
            cols = permuted(cols, *options.order_seed ^ fnv1a64(to_lower(t->name)));
        }
        out += "# ";
        out += t->name;
        out += " ( ";
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (i) out += ", ";
            out += cols[i]->name;
            if (options.with_types) {
                out += ": ";
                out += to_lower(cols[i]->declared_type);
            }
        }
        out += " )\n";
    }
    if (options.with_foreign_keys) {
        std::vector<std::string> fk_lines;
        for (const auto& fk : schema.foreign_keys) {
            bool keep = !linked || (linked->has_column(fk.from.table, fk.from.column) &&
                                    linked->has_column(fk.to.table, fk.to.column));
            if (keep) {
                fk_lines.push_back(fmt::format("# {}.{} = {}.{}\n", fk.from.table, fk.from.column,
                                               fk.to.table, fk.to.column));
            }
        }
        if (!fk_lines.empty()) {
            out += "#\n";
            for (const auto& l : fk_lines) out += l;
        }
    }
    return out;
}

std::string render_schema(const DbSchema& schema, const LinkedSchema* linked,
                          std::uint64_t order_seed) {
    RenderOptions options;
    options.order_seed = order_seed;
    return render_schema(schema, linked, options);
}

std::string render_column_descriptions(const DbSchema& schema, const LinkedSchema& linked) {
    std::string out;
    bool first = true;
    for (const TableDef* t : retained_tables(schema, &linked)) {
        if (!first) out += "\n";
        first = false;
        out += fmt::format("# [{}]\n", t->name);
        for (const ColumnDef* c : retained_columns(*t, &linked)) {
            out += fmt::format("- {} ({})", c->name, to_lower(c->declared_type));
            if (!c->description.empty()) out += ": " + c->description;
            out += "\n";
        }
    }
    return out;
}

namespace {

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace

std::string sample_table_csv(const Database& db, std::string_view table, int max_rows,
                             const std::vector<std::string>& columns) {
    if (max_rows < 0) throw ExecutionError("max_rows must be non-negative");
    std::string select_list;
    if (columns.empty()) {
        select_list = "*";
    } else {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) select_list += ", ";
            select_list += quote_identifier(columns[i]);
        }
    }
    const std::string base =
        fmt::format("SELECT {} FROM {}", select_list, quote_identifier(table));
    auto make = [&](bool by_rowid) {
        return fmt::format("{}{} LIMIT {}", base, by_rowid ? " ORDER BY rowid" : "", max_rows);
    };
    std::optional<Statement> stmt;
    try {
        stmt.emplace(db, make(true));
    } catch (const ExecutionError&) {
        // WITHOUT ROWID tables iterate in primary-key order already.
        stmt.emplace(db, make(false));
    }
    sqlite3_stmt* s = stmt->get();
    const int ncol = sqlite3_column_count(s);
    std::string out;
    for (int i = 0; i < ncol; ++i) {
        if (i) out += ",";
        out += csv_escape(sqlite3_column_name(s, i));
    }
    out += "\n";
    while (stmt->step()) {
        for (int i = 0; i < ncol; ++i) {
            if (i) out += ",";
            if (sqlite3_column_type(s, i) == SQLITE_NULL) continue;
            const auto* text = reinterpret_cast<const char*>(sqlite3_column_text(s, i));
            int len = sqlite3_column_bytes(s, i);
            out += csv_escape(std::string_view(text ? text : "", static_cast<std::size_t>(len)));
        }
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Identifier extraction

namespace {

enum class TokKind { ident, quoted_ident, string, number, punct };

struct Token {
    TokKind kind;
    std::string text;
};

std::vector<Token> tokenize_sql(std::string_view sql) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto is_ident_start = [](unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; };
    auto is_ident_char = [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '$' || c >= 0x80;
    };
    while (i < sql.size()) {
        unsigned char c = static_cast<unsigned char>(sql[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
            while (i < sql.size() && sql[i] != '\n') ++i;
        } else if (c == '/' && i + 1 < sql.size() && sql[i + 1] == '*') {
            auto end = sql.find("*/", i + 2);
            i = end == std::string_view::npos ? sql.size() : end + 2;
        } else if (c == '\'' || c == '"' || c == '`' || c == '[') {
            char close = c == '[' ? ']' : static_cast<char>(c);
            std::string text;
            ++i;
            while (i < sql.size()) {
                if (sql[i] == close) {
                    if (close != ']' && i + 1 < sql.size() && sql[i + 1] == close) {
                        text.push_back(close);
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                text.push_back(sql[i++]);
            }
            out.push_back({c == '\'' ? TokKind::string : TokKind::quoted_ident, std::move(text)});
        } else if (is_ident_start(c)) {
            std::size_t start = i;
            while (i < sql.size() && is_ident_char(static_cast<unsigned char>(sql[i]))) ++i;
            out.push_back({TokKind::ident, std::string(sql.substr(start, i - start))});
        } else if (std::isdigit(c)) {
            std::size_t start = i;
            while (i < sql.size() && (std::isalnum(static_cast<unsigned char>(sql[i])) || sql[i] == '.')) ++i;
            out.push_back({TokKind::number, std::string(sql.substr(start, i - start))});
        } else {
            out.push_back({TokKind::punct, std::string(1, static_cast<char>(c))});
            ++i;
        }
    }
    return out;
}

const std::set<std::string>& sql_keywords() {
    static const std::set<std::string> kw = {
        "select", "from", "where", "join", "inner", "left", "right", "full", "outer", "cross",
        "natural", "on", "using", "group", "order", "by", "limit", "offset", "having", "union",
        "intersect", "except", "as", "and", "or", "not", "in", "is", "null", "like", "glob",
        "between", "case", "when", "then", "else", "end", "distinct", "all", "asc", "desc",
        "exists", "with", "recursive", "values", "window", "over", "partition", "cast", "collate",
        "escape", "filter", "rows", "range", "preceding", "following", "current", "row", "unbounded",
        "true", "false", "iif"};
    return kw;
}

bool is_keyword(const Token& t) {
    return t.kind == TokKind::ident && sql_keywords().contains(to_lower(t.text));
}

bool is_name(const Token& t) {
    return (t.kind == TokKind::ident && !is_keyword(t)) || t.kind == TokKind::quoted_ident;
}

bool is_punct(const Token& t, char c) { return t.kind == TokKind::punct && t.text[0] == c; }

bool is_kw(const Token& t, std::string_view kw) {
    return t.kind == TokKind::ident && iequals(t.text, kw);
}

}  // namespace

GoldIdentifiers extract_gold_identifiers(std::string_view sql, const DbSchema& schema) {
    auto toks = tokenize_sql(sql);
    GoldIdentifiers out;
    std::map<std::string, std::string> alias_to_table;  // lower alias -> canonical table
    std::vector<const TableDef*> from_tables;
    std::vector<bool> consumed(toks.size(), false);

    // Pass 1: table references after FROM / JOIN / commas inside FROM lists.
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (!(is_kw(toks[i], "from") || is_kw(toks[i], "join"))) continue;
        std::size_t j = i + 1;
        for (;;) {
            if (j >= toks.size() || !is_name(toks[j])) break;
            if (j + 1 < toks.size() && is_punct(toks[j + 1], '.')) break;  // schema-qualified; rare
            const TableDef* table = schema.find_table(toks[j].text);
            if (table) {
                consumed[j] = true;
                if (std::find(from_tables.begin(), from_tables.end(), table) == from_tables.end()) {
                    from_tables.push_back(table);
                }
                out.tables.insert(to_lower(table->name));
            }
            std::size_t k = j + 1;
            if (k < toks.size() && is_kw(toks[k], "as")) ++k;
            if (k < toks.size() && is_name(toks[k]) &&
                !(k + 1 < toks.size() && is_punct(toks[k + 1], '('))) {
                if (table) alias_to_table[to_lower(toks[k].text)] = table->name;
                consumed[k] = true;
                ++k;
            }
            if (k < toks.size() && is_punct(toks[k], ',') && is_kw(toks[i], "from")) {
                j = k + 1;
                continue;
            }
            break;
        }
    }

    auto resolve_qualifier = [&](const std::string& name) -> const TableDef* {
        auto it = alias_to_table.find(to_lower(name));
        if (it != alias_to_table.end()) return schema.find_table(it->second);
        return schema.find_table(name);
    };

    // Pass 2: qualified and unqualified column references.
    for (std::size_t i = 0; i < toks.size(); ++i) {
        if (consumed[i] || !is_name(toks[i])) continue;
        if (i + 1 < toks.size() && is_punct(toks[i + 1], '(')) continue;  // function call
        if (i > 0 && is_punct(toks[i - 1], '.')) continue;                 // handled by qualifier
        if (i + 2 < toks.size() && is_punct(toks[i + 1], '.') && is_name(toks[i + 2])) {
            if (const TableDef* t = resolve_qualifier(toks[i].text)) {
                out.tables.insert(to_lower(t->name));
                if (const ColumnDef* c = t->find_column(toks[i + 2].text)) {
                    out.columns.insert(to_lower(t->name) + "." + to_lower(c->name));
                }
            }
            i += 2;
            continue;
        }
        for (const TableDef* t : from_tables) {
            if (const ColumnDef* c = t->find_column(toks[i].text)) {
                out.columns.insert(to_lower(t->name) + "." + to_lower(c->name));
            }
        }
    }
    return out;
}

}  // namespace mcsql
