#include "scripted_backend.hpp"

#include "mcsql/common.hpp"

#include <fmt/format.h>

#include <cctype>
#include <cmath>

namespace mcsql {

using nlohmann::json;

namespace {

std::vector<std::string> words(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c == '_') {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

template <typename T>
const T& cycle(const std::vector<T>& items, int i) {
    return items[static_cast<std::size_t>(i) % items.size()];
}

std::string malformed(int i) { return fmt::format("I am not sure which answer fits best (sample {}).", i); }

// Numbered SQL lines after the candidate header of a selection prompt.
std::vector<std::string> offered_candidates(std::string_view prompt) {
    std::vector<std::string> out;
    auto pos = prompt.find("### Candidate SQLs:\n");
    if (pos == std::string_view::npos) return out;
    auto lines = split_lines(prompt.substr(pos));
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto prefix = fmt::format("{}. ", out.size() + 1);
        if (!lines[i].starts_with(prefix)) break;
        out.push_back(lines[i].substr(prefix.size()));
    }
    return out;
}

std::string sql_answer(const std::string& sql, std::string_view reasoning) {
    return "```json\n" + json{{"reasoning", reasoning}, {"sql", sql}}.dump(2) + "\n```";
}

}  // namespace

std::vector<double> hashed_bag_of_words(std::string_view text) {
    std::vector<double> v(kScriptedEmbeddingDim, 0.0);
    for (const auto& w : words(text)) {
        const auto h = fnv1a64(w);
        const double sign = (h >> 63) ? -1.0 : 1.0;
        v[h % kScriptedEmbeddingDim] += sign;
    }
    // Keep the vector non-zero for empty or degenerate text.
    v[0] += 0.01;
    return v;
}

std::string auto_mask(std::string_view question, const DbSchema& schema) {
    std::set<std::string> tables, columns;
    for (const auto& t : schema.tables) {
        tables.insert(to_lower(t.name));
        for (const auto& c : t.columns) columns.insert(to_lower(c.name));
    }
    std::string out;
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        std::string lw = to_lower(word);
        std::string singular = lw.size() > 1 && lw.back() == 's' ? lw.substr(0, lw.size() - 1) : lw;
        bool has_digit = std::any_of(lw.begin(), lw.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
        if (tables.contains(lw) || tables.contains(singular)) out += "[TABLE]";
        else if (columns.contains(lw) || columns.contains(singular)) out += "[COLUMN]";
        else if (has_digit) out += "[VALUE]";
        else out += word;
        word.clear();
    };
    for (char ch : question) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c == '_') {
            word += ch;
        } else {
            flush();
            out += ch;
        }
    }
    flush();
    return out;
}

ScriptedBackend::ScriptedBackend(json script, const std::vector<const Benchmark*>& benchmarks)
    : script_(std::move(script)) {
    for (const auto* b : benchmarks) {
        for (const auto& ex : b->examples) examples_[ex.example_id] = Known{&ex, &b->schema(ex.db_id)};
    }
}

const json& ScriptedBackend::entry(const std::string& example_id) const {
    static const json kEmpty = json::object();
    if (script_.contains("examples") && script_.at("examples").contains(example_id)) {
        return script_.at("examples").at(example_id);
    }
    return kEmpty;
}

std::vector<std::string> ScriptedBackend::link_answers(const Known& k, const std::string& stage, int prompt,
                                                       int n) const {
    const bool tables = stage == "table_link";
    const auto& e = entry(k.example->example_id);
    const char* key = tables ? "tables" : "columns";

    std::vector<json> samples;
    if (e.contains(key) && !e.at(key).empty()) {
        const auto& per_prompt = e.at(key).at(static_cast<std::size_t>(prompt) % e.at(key).size());
        if (per_prompt.is_object()) {
            for (const auto& s : per_prompt.at("samples")) samples.push_back(s);
        } else {
            samples.push_back(per_prompt);
        }
    } else {
        auto gold = extract_gold_identifiers(k.example->gold_sql, *k.schema);
        json names = json::array();
        for (const auto& t : k.schema->tables) {
            if (tables && gold.tables.contains(to_lower(t.name))) names.push_back(t.name);
            if (!tables) {
                for (const auto& c : t.columns) {
                    if (gold.columns.contains(to_lower(t.name) + "." + to_lower(c.name))) {
                        names.push_back(t.name + "." + c.name);
                    }
                }
            }
        }
        samples.push_back(names);
    }

    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) {
        const auto& s = cycle(samples, i);
        if (s.is_string() && s.get<std::string>() == "<malformed>") {
            out.push_back(malformed(i));
            continue;
        }
        json answer{{"reasoning", tables ? "These tables hold the requested facts." : "These columns are referenced."},
                    {key, s}};
        out.push_back("```json\n" + answer.dump(2) + "\n```");
    }
    return out;
}

std::vector<std::string> ScriptedBackend::complete(const LlmRequest& request, const std::string&,
                                                   const std::string&) {
    const auto parts = [&] {
        std::vector<std::string> p;
        std::string cur;
        for (char c : request.tag) {
            if (c == '/') {
                p.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        p.push_back(cur);
        return p;
    }();
    if (parts.size() != 3) throw GatewayError("scripted backend needs stage/example/index tags, got " + request.tag);
    const std::string& stage = parts[0];
    const std::string& id = parts[1];
    const int index = std::stoi(parts[2]);
    {
        std::lock_guard lock(mutex_);
        ++calls_[stage];
        ++calls_by_example_[id];
    }
    auto it = examples_.find(id);
    if (it == examples_.end()) throw GatewayError("scripted backend has no example " + id);
    const Known& k = it->second;
    const auto& e = entry(id);

    if (stage == "table_link" || stage == "column_link") return link_answers(k, stage, index, request.n);

    if (stage == "mask") {
        std::string masked = e.contains("mask") ? e.at("mask").get<std::string>() : auto_mask(k.example->question, *k.schema);
        return {masked};
    }

    std::vector<std::string> out;
    if (stage == "generate") {
        std::vector<std::string> script;
        if (e.contains("candidates")) {
            const auto& c = e.at("candidates");
            const auto key = std::to_string(index);
            if (c.contains(key)) script = c.at(key).get<std::vector<std::string>>();
            else if (c.contains("all")) script = c.at("all").get<std::vector<std::string>>();
        }
        if (script.empty()) script.push_back(k.example->gold_sql);
        for (int i = 0; i < request.n; ++i) {
            const auto& s = cycle(script, i);
            if (s == "<malformed>") out.push_back(malformed(i));
            else if (s.starts_with("<fenced>")) out.push_back("The query is:\n```sql\n" + s.substr(8) + "\n```");
            else out.push_back(sql_answer(s, "Scripted reasoning."));
        }
        return out;
    }

    if (stage == "select") {
        const auto offered = offered_candidates(request.prompt);
        json votes = e.contains("votes") ? e.at("votes") : json::array({1});
        for (int i = 0; i < request.n; ++i) {
            const auto& v = votes.at(static_cast<std::size_t>(i) % votes.size());
            if (v.is_number_integer()) {
                auto pos = v.get<std::size_t>();
                if (pos < 1 || pos > offered.size()) throw GatewayError(fmt::format("vote {} out of range for {}", pos, id));
                out.push_back(sql_answer(offered[pos - 1], "Checked each candidate against the checklist."));
            } else if (v.get<std::string>() == "<malformed>") {
                out.push_back(malformed(i));
            } else {
                out.push_back(sql_answer(v.get<std::string>(), "Wrote a new query."));
            }
        }
        return out;
    }
    throw GatewayError("scripted backend does not know stage " + stage);
}

std::vector<std::vector<double>> ScriptedBackend::embed(std::span<const std::string> texts, const std::string&,
                                                        std::span<const std::string>) {
    {
        std::lock_guard lock(mutex_);
        calls_["embed"] += 1;
    }
    std::vector<std::vector<double>> out;
    for (const auto& t : texts) out.push_back(hashed_bag_of_words(t));
    return out;
}

std::map<std::string, std::size_t> ScriptedBackend::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

std::size_t ScriptedBackend::calls_for(const std::string& example_id) const {
    std::lock_guard lock(mutex_);
    auto it = calls_by_example_.find(example_id);
    return it == calls_by_example_.end() ? 0 : it->second;
}

}  // namespace mcsql
