#include "mcsql/schema_linker.hpp"

#include "mcsql/common.hpp"
#include "mcsql/llm_gateway.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace mcsql {

using nlohmann::json;

namespace {

constexpr std::string_view kSchemaHeader = "### SQLite SQL tables, with their properties:\n";

std::string question_lines(std::string_view question, const std::optional<std::string>& evidence) {
    std::string out = fmt::format("### Question: {}\n", question);
    if (evidence) out += fmt::format("### Knowledge Evidence: {}\n", *evidence);
    return out;
}

LinkedSchema tables_only(const DbSchema& schema, const std::set<std::string>& tables) {
    LinkedSchema linked;
    linked.db_id = schema.db_id;
    for (const auto& t : schema.tables) {
        bool keep = std::any_of(tables.begin(), tables.end(),
                                [&](const std::string& name) { return iequals(name, t.name); });
        if (!keep) continue;
        auto& cols = linked.tables[t.name];
        for (const auto& c : t.columns) cols.push_back(c.name);
    }
    return linked;
}

std::string strip_decoration(std::string_view raw) {
    std::string s = trim(raw);
    auto strip_pair = [&](char open, char close) {
        if (s.size() >= 2 && s.front() == open && s.back() == close) {
            s = trim(std::string_view(s).substr(1, s.size() - 2));
            return true;
        }
        return false;
    };
    while (strip_pair('"', '"') || strip_pair('\'', '\'') || strip_pair('`', '`') ||
           strip_pair('[', ']')) {
    }
    return s;
}

// Accepts a JSON array of names or a comma separated string.
std::vector<std::string> answer_names(const json& field) {
    std::vector<std::string> out;
    if (field.is_array()) {
        for (const auto& item : field) {
            if (item.is_string()) out.push_back(item.get<std::string>());
        }
    } else if (field.is_string()) {
        std::string s = field.get<std::string>();
        std::size_t start = 0;
        while (start <= s.size()) {
            auto comma = s.find(',', start);
            std::string part = trim(std::string_view(s).substr(
                start, comma == std::string::npos ? std::string::npos : comma - start));
            if (!part.empty()) out.push_back(part);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    return out;
}

const char* stage_name(LinkStage s) { return s == LinkStage::table ? "table" : "column"; }

}  // namespace

std::optional<std::string> canonical_table(const DbSchema& schema, std::string_view name) {
    const TableDef* t = schema.find_table(strip_decoration(name));
    if (!t) return std::nullopt;
    return t->name;
}

std::optional<ColumnRef> canonical_column(const DbSchema& schema, std::string_view name) {
    const std::string s = trim(name);
    // Try every dot outside brackets/quotes as the split point.
    char quote = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (quote) {
            if (c == quote) quote = 0;
            continue;
        }
        if (c == '[') quote = ']';
        else if (c == '"' || c == '`' || c == '\'') quote = c;
        else if (c == '.') {
            auto ref = schema.resolve_column(strip_decoration(std::string_view(s).substr(0, i)),
                                             strip_decoration(std::string_view(s).substr(i + 1)));
            if (ref) return ref;
        }
    }
    return std::nullopt;
}

std::string build_table_prompt(const DbSchema& schema, std::string_view question,
                               const std::optional<std::string>& evidence,
                               std::uint64_t permutation_seed) {
    RenderOptions render;
    render.order_seed = permutation_seed;
    std::string p;
    p += "### Given a database schema, question, and knowledge evidence, extract a list of tables "
         "that should be referenced to convert the question into SQL.\n\n";
    p += kSchemaHeader;
    p += render_schema(schema, nullptr, render);
    p += "\n";
    p += question_lines(question, evidence);
    p += "\n";
    p += "You need to not only select the required tables, but also explain in detail why each "
         "table is needed.\n";
    p += "Your answer should strictly follow the following json format.\n";
    p += "{\n";
    p += "  \"reasoning\": \"\",  // The reason for choosing each table.\n";
    p += "  \"tables\": [],  // List of selected tables.\n";
    p += "}\n\n";
    p += "### Your Answer: ";
    return p;
}

std::string build_column_prompt(const DbSchema& schema, const std::set<std::string>& linked_tables,
                                std::string_view question,
                                const std::optional<std::string>& evidence,
                                std::uint64_t permutation_seed) {
    if (linked_tables.empty()) throw LinkingError("column prompt needs at least one linked table");
    LinkedSchema linked = tables_only(schema, linked_tables);
    RenderOptions render;
    render.order_seed = permutation_seed;
    render.shuffle_columns = true;
    std::string p;
    p += "### Given a database schema, question, and knowledge evidence, extract a list of columns "
         "that should be referenced to convert the question into SQL.\n\n";
    p += kSchemaHeader;
    p += render_schema(schema, &linked, render);
    p += "\n";
    p += question_lines(question, evidence);
    p += "\n";
    p += "You need to not only select the required columns, but also explain in detail why each "
         "column is needed.\n";
    p += "Your answer should strictly follow the following json format.\n";
    p += "{\n";
    p += "  \"reasoning\": \"\",  // The reason for choosing each column.\n";
    p += "  \"columns\": [\"table_name_i.column_name_j\", ...],  // List of selected columns \n";
    p += "}\n\n";
    p += "### Your Answer:";
    return p;
}

json to_json(const LinkingTrace& trace) {
    return json{{"stage", stage_name(trace.stage)},
                {"prompt_index", trace.prompt_index},
                {"permutation_seed", trace.permutation_seed},
                {"answers", trace.answers},
                {"dropped_names", trace.dropped_names},
                {"unparseable", trace.unparseable},
                {"fallbacks", trace.fallbacks}};
}

LinkingTrace linking_trace_from_json(const json& j) {
    LinkingTrace t;
    t.stage = j.at("stage").get<std::string>() == "table" ? LinkStage::table : LinkStage::column;
    t.prompt_index = j.at("prompt_index").get<int>();
    t.permutation_seed = j.at("permutation_seed").get<std::uint64_t>();
    t.answers = j.at("answers").get<std::vector<std::vector<std::string>>>();
    t.dropped_names = j.at("dropped_names").get<std::vector<std::string>>();
    t.unparseable = j.at("unparseable").get<int>();
    t.fallbacks = j.at("fallbacks").get<std::vector<std::string>>();
    return t;
}

json to_json(const LinkedSchema& linked) {
    return json{{"db_id", linked.db_id}, {"tables", linked.tables}};
}

LinkedSchema linked_schema_from_json(const json& j) {
    LinkedSchema l;
    l.db_id = j.at("db_id").get<std::string>();
    l.tables = j.at("tables").get<std::map<std::string, std::vector<std::string>>>();
    return l;
}

std::set<std::string> union_tables(const std::vector<LinkingTrace>& traces, const DbSchema& schema) {
    std::set<std::string> out;
    for (const auto& t : traces) {
        for (const auto& answer : t.answers) {
            for (const auto& name : answer) {
                if (auto canon = canonical_table(schema, name)) out.insert(*canon);
            }
        }
    }
    return out;
}

LinkedSchema union_columns(const std::vector<LinkingTrace>& traces, const DbSchema& schema,
                           const std::set<std::string>& linked_tables,
                           std::vector<std::string>* widened_tables) {
    std::set<ColumnRef> chosen;
    for (const auto& t : traces) {
        for (const auto& answer : t.answers) {
            for (const auto& name : answer) {
                if (auto ref = canonical_column(schema, name)) chosen.insert(*ref);
            }
        }
    }
    auto is_linked = [&](std::string_view table) {
        return std::any_of(linked_tables.begin(), linked_tables.end(),
                           [&](const std::string& l) { return iequals(l, table); });
    };
    for (const auto& fk : schema.foreign_keys) {
        if (is_linked(fk.from.table) && is_linked(fk.to.table)) {
            chosen.insert(fk.from);
            chosen.insert(fk.to);
        }
    }

    LinkedSchema linked;
    linked.db_id = schema.db_id;
    for (const auto& table : schema.tables) {
        if (!is_linked(table.name)) continue;
        std::vector<std::string> cols;
        for (const auto& c : table.columns) {
            if (chosen.contains(ColumnRef{table.name, c.name})) cols.push_back(c.name);
        }
        if (cols.empty()) {
            for (const auto& c : table.columns) cols.push_back(c.name);
            if (widened_tables) widened_tables->push_back(table.name);
        }
        linked.tables[table.name] = std::move(cols);
    }
    return linked;
}

TableLinkResult link_tables(Gateway& gateway, const BenchmarkExample& example,
                            const DbSchema& schema, const RunConfig& config) {
    if (config.p_t < 1 || config.n < 1) throw LinkingError("p_t and n must be >= 1");
    static const std::vector<std::string> kRequired = {"tables"};
    TableLinkResult result;
    int parsed = 0;
    for (int i = 0; i < config.p_t; ++i) {
        LinkingTrace trace;
        trace.stage = LinkStage::table;
        trace.prompt_index = i;
        trace.permutation_seed = derive_seed(config.seed, example.example_id, "table", i);
        LlmRequest request;
        request.prompt = build_table_prompt(schema, example.question, example.evidence,
                                            trace.permutation_seed);
        request.n = config.n;
        request.temperature = config.temperature;
        request.max_output_tokens = config.max_output_tokens;
        request.tag = fmt::format("table_link/{}/{}", example.example_id, i);
        auto completions = gateway.complete(request);
        parse_completions(completions, kRequired);
        for (const auto& c : completions) {
            if (!c.parsed) {
                ++trace.unparseable;
                continue;
            }
            ++parsed;
            std::vector<std::string> answer;
            for (const auto& name : answer_names(c.parsed->at("tables"))) {
                if (auto canon = canonical_table(schema, name)) {
                    if (std::find(answer.begin(), answer.end(), *canon) == answer.end()) {
                        answer.push_back(*canon);
                    }
                } else {
                    trace.dropped_names.push_back(name);
                }
            }
            trace.answers.push_back(std::move(answer));
        }
        result.traces.push_back(std::move(trace));
    }
    if (parsed == 0) {
        throw LinkingError(fmt::format("table linking for {}: no parseable response", example.example_id));
    }
    result.tables = union_tables(result.traces, schema);
    if (result.tables.empty()) {
        for (const auto& t : schema.tables) {
            result.tables.insert(t.name);
            result.traces.front().fallbacks.push_back(t.name);
        }
    }
    return result;
}

ColumnLinkResult link_columns(Gateway& gateway, const BenchmarkExample& example,
                              const DbSchema& schema, const std::set<std::string>& linked_tables,
                              const RunConfig& config) {
    if (config.p_c < 1 || config.n < 1) throw LinkingError("p_c and n must be >= 1");
    for (const auto& t : linked_tables) {
        if (!schema.find_table(t)) throw LinkingError(fmt::format("linked table '{}' not in schema", t));
    }
    static const std::vector<std::string> kRequired = {"columns"};
    ColumnLinkResult result;
    int parsed = 0;
    for (int i = 0; i < config.p_c; ++i) {
        LinkingTrace trace;
        trace.stage = LinkStage::column;
        trace.prompt_index = i;
        trace.permutation_seed = derive_seed(config.seed, example.example_id, "column", i);
        LlmRequest request;
        request.prompt = build_column_prompt(schema, linked_tables, example.question, example.evidence,
                                             trace.permutation_seed);
        request.n = config.n;
        request.temperature = config.temperature;
        request.max_output_tokens = config.max_output_tokens;
        request.tag = fmt::format("column_link/{}/{}", example.example_id, i);
        auto completions = gateway.complete(request);
        parse_completions(completions, kRequired);
        for (const auto& c : completions) {
            if (!c.parsed) {
                ++trace.unparseable;
                continue;
            }
            ++parsed;
            std::vector<std::string> answer;
            for (const auto& name : answer_names(c.parsed->at("columns"))) {
                auto ref = canonical_column(schema, name);
                bool in_scope = ref && std::any_of(linked_tables.begin(), linked_tables.end(),
                                                   [&](const std::string& l) { return iequals(l, ref->table); });
                if (!in_scope) {
                    trace.dropped_names.push_back(name);
                    continue;
                }
                std::string canon = ref->table + "." + ref->column;
                if (std::find(answer.begin(), answer.end(), canon) == answer.end()) {
                    answer.push_back(std::move(canon));
                }
            }
            trace.answers.push_back(std::move(answer));
        }
        result.traces.push_back(std::move(trace));
    }
    if (parsed == 0) {
        throw LinkingError(fmt::format("column linking for {}: no parseable response", example.example_id));
    }
    std::vector<std::string> widened;
    result.linked = union_columns(result.traces, schema, linked_tables, &widened);
    result.traces.front().fallbacks = widened;
    return result;
}

}  // namespace mcsql
