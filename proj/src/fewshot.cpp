#include "mcsql/fewshot.hpp"

#include "mcsql/common.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace mcsql {

using nlohmann::json;

namespace {

// Three worked examples shown ahead of every masking request. The first
// character is a newline from the raw-string layout and is skipped.
constexpr std::string_view kMaskingPreamble = R"PROMPT(
### Given a DB schema and a question, mask the table name, column name, and values in the question.

<example1>
### SQLite SQL tables, with their properties:
# customers ( CustomerID: integer, Segment: text, Currency: text )
# gasstations ( GasStationID: integer, ChainID: integer, Country: text, Segment: text )
# products ( ProductID: integer, Description: text )
# transactions_1k ( TransactionID: integer, Date: date, Time: text, CustomerID: integer, CardID: integer, GasStationID: integer, ProductID: integer, Amount: integer, Price: real )
# yearmonth ( CustomerID: integer, Date: text, Consumption: real )

### Question: For all the people who paid more than 29.00 per unit of product id No.5. Give their consumption status in the August of 2012.
### Masked Question: For all the [TABLE] who paid more than [VALUE] per unit of [COLUMN] [VALUE]. Give their consumption status in the [VALUE]. 
</example1>

<example2>
### SQLite SQL tables, with their properties:
# customers ( CustomerID: integer, Segment: text, Currency: text )
# gasstations ( GasStationID: integer, ChainID: integer, Country: text, Segment: text )
# products ( ProductID: integer, Description: text )
# transactions_1k ( TransactionID: integer, Date: date, Time: text, CustomerID: integer, CardID: integer, GasStationID: integer, ProductID: integer, Amount: integer, Price: real )
# yearmonth ( CustomerID: integer, Date: text, Consumption: real )

### Question: How much did customer 6 consume in total between August and November 2013?
### Masked Question: How much did [TABLE] [VALUE] consume in total between [VALUE] and [VALUE]?
</example2>

<example3>
### SQLite SQL tables, with their properties:
# drivers ( driverId: integer, driverRef: text, number: integer, code: text, forename: text, surname: text, dob: date, nationality: text, url: text )

### Question: How many Australian drivers who were born in 1980? 
### Masked Question: How many [VALUE] [TABLE] who were born in [VALUE]?
</example3>
)PROMPT";

}  // namespace

std::string build_masking_prompt(const DbSchema& schema, std::string_view question,
                                 const std::optional<std::string>& evidence) {
    std::string p(kMaskingPreamble.substr(1));
    p += "\n\n";
    p += "### SQLite SQL tables, with their properties:\n";
    p += render_schema(schema, nullptr, RenderOptions{});
    p += "\n";
    p += fmt::format("### Question: {}\n", question);
    if (evidence) p += fmt::format("### Knowledge Evidence: {}\n", *evidence);
    p += "\n";
    p += "### Masked Question: ";
    return p;
}

std::optional<std::string> extract_masked_answer(std::string_view completion) {
    constexpr std::string_view kCue = "### Masked Question:";
    if (auto pos = completion.rfind(kCue); pos != std::string_view::npos) {
        completion = completion.substr(pos + kCue.size());
    }
    for (const auto& line : split_lines(completion)) {
        std::string t = trim(line);
        if (t.empty() || t.starts_with("```")) continue;
        if (t.size() >= 2 && t.front() == '"' && t.back() == '"') t = trim(t.substr(1, t.size() - 2));
        if (t.empty()) continue;
        return t;
    }
    return std::nullopt;
}

MaskedQuestion mask_question(Gateway& gateway, const BenchmarkExample& example,
                             const DbSchema& schema) {
    LlmRequest request;
    request.prompt = build_masking_prompt(schema, example.question, example.evidence);
    request.n = 1;
    request.temperature = 0.0;
    request.max_output_tokens = 256;
    request.tag = fmt::format("mask/{}/0", example.example_id);
    auto completions = gateway.complete(request);

    MaskedQuestion out{example.question, example.question, true};
    if (!completions.empty()) {
        if (auto masked = extract_masked_answer(completions.front().raw_text)) {
            out.masked = *masked;
            out.fell_back = false;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Index

void ExampleIndex::save(const std::filesystem::path& path) const {
    json entries_json = json::array();
    for (const auto& e : entries) {
        entries_json.push_back({{"example_id", e.example_id},
                                {"question", e.question},
                                {"evidence", e.evidence ? json(*e.evidence) : json(nullptr)},
                                {"gold_sql", e.gold_sql},
                                {"question_vec", e.question_vec.values},
                                {"masked_vec", e.masked_vec.values}});
    }
    json doc = {{"version", kFormatVersion},
                {"model_id", model_id},
                {"dimension", dimension},
                {"entries", std::move(entries_json)}};
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write index " + path.string());
    out << doc.dump() << "\n";
}

ExampleIndex ExampleIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read index " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    json doc = json::parse(ss.str(), nullptr, false);
    if (doc.is_discarded()) throw ParseError("index file is not valid JSON", path.string());
    if (doc.value("version", 0) != kFormatVersion) {
        throw Error(fmt::format("index {} has unsupported version", path.string()));
    }
    ExampleIndex index;
    index.model_id = doc.at("model_id").get<std::string>();
    index.dimension = doc.at("dimension").get<std::size_t>();
    for (const auto& e : doc.at("entries")) {
        IndexEntry entry;
        entry.example_id = e.at("example_id").get<std::string>();
        entry.question = e.at("question").get<std::string>();
        if (!e.at("evidence").is_null()) entry.evidence = e.at("evidence").get<std::string>();
        entry.gold_sql = e.at("gold_sql").get<std::string>();
        entry.question_vec.values = e.at("question_vec").get<std::vector<double>>();
        entry.masked_vec.values = e.at("masked_vec").get<std::vector<double>>();
        if (entry.question_vec.dimension() != index.dimension ||
            entry.masked_vec.dimension() != index.dimension) {
            throw Error(fmt::format("index entry {} has the wrong dimension", entry.example_id));
        }
        index.entries.push_back(std::move(entry));
    }
    return index;
}

ExampleIndex build_index(Gateway& gateway, const std::vector<BenchmarkExample>& train,
                         const std::map<std::string, DbSchema>& schemas) {
    if (train.empty()) throw Error("few-shot index needs at least one training example");
    std::vector<std::string> questions;
    std::vector<std::string> masked;
    for (const auto& ex : train) {
        auto it = schemas.find(ex.db_id);
        if (it == schemas.end()) throw LoadError("training example references unknown db " + ex.db_id);
        questions.push_back(ex.question);
        masked.push_back(mask_question(gateway, ex, it->second).masked);
    }
    auto q_vecs = gateway.embed(questions);
    auto m_vecs = gateway.embed(masked);

    ExampleIndex index;
    index.model_id = gateway.options().embedding_model;
    index.dimension = q_vecs.front().dimension();
    for (std::size_t i = 0; i < train.size(); ++i) {
        index.entries.push_back(IndexEntry{train[i].example_id, std::move(q_vecs[i]), std::move(m_vecs[i]),
                                           train[i].question, train[i].evidence, train[i].gold_sql});
    }
    return index;
}

std::vector<RankedExample> select_examples(const ExampleIndex& index, const EmbeddingVector& query,
                                           SimilarityStrategy strategy, int k,
                                           std::string_view exclude_id) {
    if (k < 1) throw Error("k must be >= 1");
    if (query.dimension() != index.dimension) {
        throw Error(fmt::format("query dimension {} does not match index dimension {}",
                                query.dimension(), index.dimension));
    }
    std::vector<RankedExample> ranked;
    ranked.reserve(index.entries.size());
    for (std::size_t i = 0; i < index.entries.size(); ++i) {
        const auto& e = index.entries[i];
        if (e.example_id == exclude_id) continue;
        const auto& vec = strategy == SimilarityStrategy::question ? e.question_vec : e.masked_vec;
        double dot = 0.0;
        for (std::size_t d = 0; d < vec.values.size(); ++d) dot += vec.values[d] * query.values[d];
        ranked.push_back(RankedExample{i, dot});
    }
    auto better = [&](const RankedExample& a, const RankedExample& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return index.entries[a.entry].example_id < index.entries[b.entry].example_id;
    };
    const auto keep = std::min(ranked.size(), static_cast<std::size_t>(k));
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(), better);
    ranked.resize(keep);
    return ranked;
}

json to_json(const FewShotList& list) {
    json items = json::array();
    for (const auto& item : list.items) {
        items.push_back({{"example_id", item.example_id},
                         {"question", item.question},
                         {"evidence", item.evidence ? json(*item.evidence) : json(nullptr)},
                         {"gold_sql", item.gold_sql}});
    }
    return json{{"variant_index", list.variant_index}, {"items", std::move(items)}};
}

FewShotList fewshot_list_from_json(const json& j) {
    FewShotList list;
    list.variant_index = j.at("variant_index").get<int>();
    for (const auto& item : j.at("items")) {
        FewShotItem fi;
        fi.example_id = item.at("example_id").get<std::string>();
        fi.question = item.at("question").get<std::string>();
        if (!item.at("evidence").is_null()) fi.evidence = item.at("evidence").get<std::string>();
        fi.gold_sql = item.at("gold_sql").get<std::string>();
        list.items.push_back(std::move(fi));
    }
    return list;
}

namespace {

using Ranking = std::vector<std::size_t>;  // entry positions, best first

Ranking interleave(const Ranking& first, const Ranking& second, std::size_t k) {
    Ranking out;
    std::set<std::size_t> seen;
    std::size_t i = 0, j = 0;
    bool take_first = true;
    auto next_from = [&](const Ranking& r, std::size_t& pos) -> std::optional<std::size_t> {
        while (pos < r.size() && seen.contains(r[pos])) ++pos;
        if (pos >= r.size()) return std::nullopt;
        return r[pos++];
    };
    while (out.size() < k && (i < first.size() || j < second.size())) {
        auto pick = take_first ? next_from(first, i) : next_from(second, j);
        if (!pick) pick = take_first ? next_from(second, j) : next_from(first, i);
        if (!pick) break;
        seen.insert(*pick);
        out.push_back(*pick);
        take_first = !take_first;
    }
    return out;
}

Ranking summed_rank(const ExampleIndex& index, const Ranking& a, const Ranking& b, std::size_t k) {
    std::map<std::size_t, std::pair<std::size_t, std::size_t>> ranks;  // entry -> (rank a, rank b)
    for (std::size_t r = 0; r < a.size(); ++r) ranks[a[r]] = {r, k};
    for (std::size_t r = 0; r < b.size(); ++r) {
        auto [it, inserted] = ranks.try_emplace(b[r], std::pair{k, r});
        if (!inserted) it->second.second = r;
    }
    Ranking out;
    for (const auto& [entry, _] : ranks) out.push_back(entry);
    std::sort(out.begin(), out.end(), [&](std::size_t x, std::size_t y) {
        auto [xa, xb] = ranks[x];
        auto [ya, yb] = ranks[y];
        if (xa + xb != ya + yb) return xa + xb < ya + yb;
        if (xa != ya) return xa < ya;
        return index.entries[x].example_id < index.entries[y].example_id;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

}  // namespace

std::vector<FewShotList> compose_variants(const ExampleIndex& index,
                                          const std::vector<RankedExample>& by_question,
                                          const std::vector<RankedExample>& by_masked, int k,
                                          int p_q) {
    if (p_q < 1) throw Error("p_q must be >= 1");
    const auto kk = static_cast<std::size_t>(std::max(k, 0));
    auto positions = [kk](const std::vector<RankedExample>& ranked) {
        Ranking r;
        std::set<std::size_t> seen;
        for (const auto& e : ranked) {
            if (r.size() >= kk) break;
            if (seen.insert(e.entry).second) r.push_back(e.entry);
        }
        return r;
    };
    const Ranking q = positions(by_question);
    const Ranking m = positions(by_masked);

    std::vector<FewShotList> out;
    for (int v = 0; v < p_q; ++v) {
        Ranking r;
        switch (v % 5) {
            case 0: r = q; break;
            case 1: r = m; break;
            case 2: r = interleave(q, m, kk); break;
            case 3: r = interleave(m, q, kk); break;
            default: r = summed_rank(index, q, m, kk); break;
        }
        if (v >= 5) std::reverse(r.begin(), r.end());
        FewShotList list;
        list.variant_index = v;
        for (auto pos : r) {
            const auto& e = index.entries[pos];
            list.items.push_back(FewShotItem{e.example_id, e.question, e.evidence, e.gold_sql});
        }
        out.push_back(std::move(list));
    }
    return out;
}

QueryEmbeddings embed_query(Gateway& gateway, const BenchmarkExample& example,
                            const DbSchema& schema) {
    QueryEmbeddings q;
    try {
        q.masking = mask_question(gateway, example, schema);
    } catch (const FixtureMissingError&) {
        throw;
    } catch (const GatewayError&) {
        q.masking = MaskedQuestion{example.question, example.question, true};
    }
    std::vector<std::string> texts = {example.question, q.masking.masked};
    auto vecs = gateway.embed(texts);
    q.question = std::move(vecs[0]);
    q.masked = std::move(vecs[1]);
    return q;
}

std::vector<FewShotList> make_prompt_variants(const ExampleIndex& index,
                                              const BenchmarkExample& example,
                                              const QueryEmbeddings& query, int k, int p_q) {
    auto by_question = select_examples(index, query.question, SimilarityStrategy::question, k,
                                       example.example_id);
    // A failed masking degrades the masked variant to plain question similarity.
    auto by_masked = query.masking.fell_back
                         ? by_question
                         : select_examples(index, query.masked, SimilarityStrategy::masked, k,
                                           example.example_id);
    return compose_variants(index, by_question, by_masked, k, p_q);
}

}  // namespace mcsql
