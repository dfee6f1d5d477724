#include "test_support.hpp"

#include "mcsql/common.hpp"
#include "mcsql/fewshot.hpp"
#include "mcsql/schema_linker.hpp"
#include "mcsql/sqlite_db.hpp"

#include <fmt/format.h>
#include <sqlite3.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>
#include <unistd.h>

namespace mcsql::testing {

namespace fs = std::filesystem;

fs::path desk_dir() { return MCSQL_TEST_DESK_DIR; }
fs::path golden_dir() { return MCSQL_TEST_GOLDEN_DIR; }
fs::path cli_path() { return MCSQL_TEST_CLI; }

TempDir::TempDir(std::string_view label) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() / fmt::format("mcsql-{}-{}-{}", label, ::getpid(), counter++);
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ResultFingerprint fingerprint_of_group(int group) {
    ResultFingerprint fp;
    fp.digest = sha256(fmt::format("group-{}", group));
    return fp;
}

namespace {

ExecutionOutcome ok_outcome(int group, double time_ms) {
    ExecutionOutcome o;
    o.status = ExecStatus::ok;
    o.fingerprint = fingerprint_of_group(group);
    o.row_count = 1;
    o.exec_time_ms = time_ms;
    return o;
}

ExecutionOutcome failed_outcome() {
    ExecutionOutcome o;
    o.status = ExecStatus::runtime_error;
    o.error_message = "no such column";
    return o;
}

}  // namespace

SyntheticPool random_pool(std::mt19937_64& rng, std::size_t size) {
    SyntheticPool pool;
    std::uniform_int_distribution<int> groups_dist(1, static_cast<int>(size));
    const int groups = groups_dist(rng);
    std::uniform_int_distribution<int> group_dist(0, groups - 1);
    // Times on a coarse grid so equal times, and hence provenance tie-breaks, occur.
    std::uniform_int_distribution<int> time_dist(1, 50);
    std::bernoulli_distribution fails(0.1);
    for (std::size_t i = 0; i < size; ++i) {
        CandidateQuery q;
        q.prompt_index = static_cast<int>(i / 20);
        q.sample_index = static_cast<int>(i % 20);
        q.sql = fmt::format("SELECT {}", i);
        pool.candidates.push_back(q);
        if (i > 0 && fails(rng)) {
            pool.outcomes.push_back(failed_outcome());
            pool.group_of.push_back(-1);
        } else {
            const int g = group_dist(rng);
            pool.outcomes.push_back(ok_outcome(g, time_dist(rng) * 0.5));
            pool.group_of.push_back(g);
        }
    }
    return pool;
}

SyntheticPool pool_with_groups(const std::vector<int>& group_sizes) {
    SyntheticPool pool;
    int position = 0;
    for (std::size_t g = 0; g < group_sizes.size(); ++g) {
        for (int i = 0; i < group_sizes[g]; ++i, ++position) {
            CandidateQuery q;
            q.prompt_index = position / 20;
            q.sample_index = position % 20;
            q.sql = fmt::format("SELECT {} /* group {} */", position, g);
            pool.candidates.push_back(q);
            pool.outcomes.push_back(ok_outcome(static_cast<int>(g), 1.0 + position));
            pool.group_of.push_back(static_cast<int>(g));
        }
    }
    return pool;
}

fs::path desk_database(std::string_view db_id) {
    return desk_dir() / "database" / std::string(db_id) / (std::string(db_id) + ".sqlite");
}

bool execution_equivalent(const fs::path& db, std::string_view a, std::string_view b) {
    ExecOptions options;
    options.timing = TimingMode::vm_steps;
    const auto ra = execute(db, a, options);
    const auto rb = execute(db, b, options);
    return ra.ok() && rb.ok() && ra.fingerprint == rb.fingerprint;
}

std::vector<EquivalenceCase> equivalence_suite() {
    const std::string tox = "toxicology";
    const std::string f1 = "formula_1";
    const std::string f1_gold_2009 =
        "SELECT T1.forename, T1.surname FROM drivers AS T1 INNER JOIN results AS T2 ON T1.driverId = T2.driverId "
        "INNER JOIN races AS T3 ON T2.raceId = T3.raceId WHERE T3.year = 2009 GROUP BY T1.driverId "
        "ORDER BY SUM(T2.points) DESC LIMIT 1";
    return {
        {"row order without ORDER BY", tox, "SELECT atom_id FROM atom WHERE molecule_id = 'TR000'",
         "SELECT atom_id FROM atom WHERE molecule_id = 'TR000' ORDER BY atom_id DESC", true},
        {"SELECT column reorder", tox, "SELECT atom_id, element FROM atom", "SELECT element, atom_id FROM atom", false},
        {"COUNT(*) vs COUNT(non-null column)", tox, "SELECT COUNT(*) FROM molecule",
         "SELECT COUNT(molecule_id) FROM molecule", true},
        {"output alias", tox, "SELECT label AS l FROM molecule", "SELECT label FROM molecule", true},
        {"DISTINCT changes multiplicity", tox, "SELECT DISTINCT label FROM molecule", "SELECT label FROM molecule",
         false},
        {"GROUP BY vs DISTINCT", tox, "SELECT label FROM molecule GROUP BY label",
         "SELECT DISTINCT label FROM molecule", true},
        {"integral real vs integer", tox, "SELECT COUNT(*) FROM molecule",
         "SELECT CAST(COUNT(*) AS REAL) FROM molecule", true},
        {"reals equal after six decimals", tox, "SELECT 1.0 / 3", "SELECT 0.3333333", true},
        {"reals differ in sixth decimal", tox, "SELECT 0.333333", "SELECT 0.333334", false},
        {"bond share vs molecule share", tox,
         "SELECT CAST(COUNT(CASE WHEN bond_type = '#' THEN 1 ELSE NULL END) AS REAL) * 100 / COUNT(*) FROM bond",
         "SELECT CAST(COUNT(DISTINCT CASE WHEN bond_type = '#' THEN molecule_id ELSE NULL END) AS REAL) * 100 / "
         "COUNT(DISTINCT molecule_id) FROM bond",
         false},
        {"table alias rewrite", tox,
         "SELECT CAST(COUNT(DISTINCT CASE WHEN bond_type = '#' THEN molecule_id ELSE NULL END) AS REAL) * 100 / "
         "COUNT(DISTINCT molecule_id) FROM bond",
         "SELECT CAST(COUNT(DISTINCT CASE WHEN T.bond_type = '#' THEN T.molecule_id END) AS REAL) * 100 / "
         "COUNT(DISTINCT T.molecule_id) FROM bond AS T",
         true},
        {"join vs IN subquery", tox,
         "SELECT T1.element FROM atom AS T1 INNER JOIN molecule AS T2 ON T1.molecule_id = T2.molecule_id "
         "WHERE T2.label = '+'",
         "SELECT element FROM atom WHERE molecule_id IN (SELECT molecule_id FROM molecule WHERE label = '+')", true},
        {"NULL vs empty string", tox, "SELECT NULL", "SELECT ''", false},
        {"duplicates kept vs removed", tox, "SELECT element FROM atom", "SELECT DISTINCT element FROM atom", false},
        {"LIMIT 1 vs LIMIT 2", tox,
         "SELECT bond_type FROM bond GROUP BY bond_type ORDER BY COUNT(*) DESC LIMIT 1",
         "SELECT bond_type FROM bond GROUP BY bond_type ORDER BY COUNT(*) DESC LIMIT 2", false},
        {"text is case sensitive", tox, "SELECT 'c'", "SELECT 'C'", false},
        {"two empty results", tox, "SELECT atom_id FROM atom WHERE 0", "SELECT bond_id FROM bond WHERE 1 = 2", true},
        {"failing query never matches", tox, "SELECT bond_kind FROM bond", "SELECT bond_type FROM bond", false},
        {"join vs scalar subquery", f1, f1_gold_2009,
         "SELECT forename, surname FROM drivers WHERE driverId = (SELECT T2.driverId FROM results AS T2 "
         "INNER JOIN races AS T3 ON T2.raceId = T3.raceId WHERE T3.year = 2009 GROUP BY T2.driverId "
         "ORDER BY SUM(T2.points) DESC LIMIT 1)",
         true},
        {"missing year filter", f1, f1_gold_2009,
         "SELECT T1.forename, T1.surname FROM drivers AS T1 INNER JOIN results AS T2 ON T1.driverId = T2.driverId "
         "GROUP BY T1.driverId ORDER BY SUM(T2.points) DESC LIMIT 1",
         false},
        {"STRFTIME vs LIKE on dates", f1,
         "SELECT COUNT(driverId) FROM drivers WHERE nationality = 'Australian' AND STRFTIME('%Y', dob) = '1980'",
         "SELECT COUNT(driverId) FROM drivers WHERE nationality = 'Australian' AND dob LIKE '1980%'", true},
        {"race name without year", f1, "SELECT date FROM races WHERE name = 'Monaco Grand Prix' AND year = 2009",
         "SELECT date FROM races WHERE name = 'Monaco Grand Prix'", false},
        {"forename/surname swapped", f1, "SELECT forename, surname FROM drivers WHERE nationality = 'German'",
         "SELECT surname, forename FROM drivers WHERE nationality = 'German'", false},
        {"UNION ALL with an empty branch", f1, "SELECT nationality FROM drivers",
         "SELECT nationality FROM drivers UNION ALL SELECT nationality FROM drivers WHERE 0", true},
    };
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double plain_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = std::sqrt(dot(a, a));
    const double nb = std::sqrt(dot(b, b));
    return dot(a, b) / (na * nb);
}

}  // namespace

std::vector<std::string> brute_force_top_k(const ExampleIndex& index, const EmbeddingVector& query,
                                           SimilarityStrategy strategy, int k, std::string_view exclude_id) {
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& e : index.entries) {
        if (e.example_id == exclude_id) continue;
        const auto& v = strategy == SimilarityStrategy::question ? e.question_vec : e.masked_vec;
        scored.emplace_back(plain_cosine(v.values, query.values), e.example_id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < scored.size() && static_cast<int>(i) < k; ++i) out.push_back(scored[i].second);
    return out;
}

EmbeddingVector random_unit_vector(std::mt19937_64& rng, std::size_t dimension) {
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> v(dimension);
    for (auto& x : v) x = d(rng);
    return normalized(std::move(v));
}

ExampleIndex random_index(std::mt19937_64& rng, std::size_t entries, std::size_t dimension) {
    ExampleIndex index;
    index.dimension = dimension;
    index.model_id = "random";
    std::bernoulli_distribution duplicate(0.1);
    for (std::size_t i = 0; i < entries; ++i) {
        IndexEntry e;
        // Shuffle ids so entry order and id order disagree.
        e.example_id = fmt::format("ex{:04}", (i * 7919) % 10007);
        if (i > 0 && duplicate(rng)) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            const auto& src = index.entries[pick(rng)];
            e.question_vec = src.question_vec;
            e.masked_vec = src.masked_vec;
        } else {
            e.question_vec = random_unit_vector(rng, dimension);
            e.masked_vec = random_unit_vector(rng, dimension);
        }
        e.question = "q" + e.example_id;
        e.gold_sql = "SELECT 1";
        index.entries.push_back(std::move(e));
    }
    return index;
}

std::string normalize_schema_permutation(std::string_view prompt) {
    static const std::regex table_line(R"(^# (\S+) \( (.*) \)$)");
    static const std::regex fk_line(R"(^# \S+\.\S+ = \S+\.\S+$)");
    auto lines = split_lines(prompt);
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < lines.size()) {
        std::smatch m;
        if (std::regex_match(lines[i], table_line)) {
            std::vector<std::string> block;
            for (; i < lines.size() && std::regex_match(lines[i], m, table_line); ++i) {
                std::vector<std::string> cols;
                std::string list = m[2];
                std::size_t start = 0;
                while (true) {
                    auto comma = list.find(", ", start);
                    cols.push_back(list.substr(start, comma - start));
                    if (comma == std::string::npos) break;
                    start = comma + 2;
                }
                std::sort(cols.begin(), cols.end());
                std::string joined;
                for (std::size_t c = 0; c < cols.size(); ++c) joined += (c ? ", " : "") + cols[c];
                block.push_back(fmt::format("# {} ( {} )", m[1].str(), joined));
            }
            std::sort(block.begin(), block.end());
            out.insert(out.end(), block.begin(), block.end());
            continue;
        }
        if (std::regex_match(lines[i], fk_line)) {
            std::vector<std::string> block;
            for (; i < lines.size() && std::regex_match(lines[i], fk_line); ++i) block.push_back(lines[i]);
            std::sort(block.begin(), block.end());
            out.insert(out.end(), block.begin(), block.end());
            continue;
        }
        out.push_back(lines[i++]);
    }
    std::string joined;
    for (std::size_t l = 0; l < out.size(); ++l) joined += (l ? "\n" : "") + out[l];
    return joined;
}

std::map<std::string, std::string> molecule_bond_prompts(std::uint64_t seed) {
    const auto bench = load_benchmark(desk_dir(), Split::dev);
    const auto it = std::find_if(bench.examples.begin(), bench.examples.end(),
                                 [](const BenchmarkExample& e) { return e.example_id == "1"; });
    if (it == bench.examples.end()) throw Error("desk example 1 is missing");
    const BenchmarkExample& example = *it;
    const DbSchema& schema = bench.schema(example.db_id);

    DbSchema sub;
    sub.db_id = schema.db_id;
    for (const auto& t : schema.tables) {
        if (t.name == "molecule" || t.name == "bond") sub.tables.push_back(t);
    }
    for (const auto& fk : schema.foreign_keys) {
        if (sub.find_table(fk.from.table) && sub.find_table(fk.to.table)) sub.foreign_keys.push_back(fk);
    }

    LinkedSchema linked;
    linked.db_id = schema.db_id;
    linked.tables["molecule"] = {"molecule_id", "label"};
    linked.tables["bond"] = {"bond_id", "molecule_id", "bond_type"};

    FewShotList fewshot;
    fewshot.items.push_back(
        {"x1", "Among all the customers, what is the percentage of the customer's nation being Germany?",
         "DIVIDE(COUNT(c_custkey when n_name = 'GERMANY'), COUNT(c_custkey)) as percentage;",
         "SELECT CAST(SUM(IIF(T2.n_name = 'GERMANY', 1, 0)) AS REAL) * 100 / COUNT(T1.c_custkey) FROM customer AS T1 "
         "INNER JOIN nation AS T2 ON T1.c_nationkey = T2.n_nationkey"});
    fewshot.items.push_back(
        {"x2",
         "Among the schools whose donators are teachers, what is the percentage of schools that are in Brooklyn?",
         "donors are teachers refers to is_teacher_acct = 't'; Brooklyn is school_city; percentage = "
         "Divide(Count(school_city-'Brooklyn'),Count(school_city))*100",
         "SELECT CAST(SUM(CASE WHEN T1.school_city LIKE 'Brooklyn' THEN 1 ELSE 0 END) AS REAL) * 100 / "
         "COUNT(T1.teacher_acctid) FROM projects AS T1 INNER JOIN donations AS T2 ON T1.projectid = T2.projectid "
         "WHERE T2.is_teacher_acct = 't'"});

    Database db(bench.database_path(example.db_id));
    PromptContext context{&schema, &linked, &db, &example, 3};

    std::vector<ScoredCandidate> candidates(2);
    candidates[0].query.sql =
        "SELECT CAST(COUNT(CASE WHEN bond_type = '#' THEN 1 ELSE NULL END) AS REAL) * 100 / COUNT(*) FROM bond";
    candidates[0].confidence = 0.6;
    candidates[1].query.sql =
        "SELECT CAST(COUNT(DISTINCT CASE WHEN bond_type = '#' THEN molecule_id ELSE NULL END) AS REAL) * 100 / "
        "COUNT(DISTINCT molecule_id) FROM bond";
    candidates[1].confidence = 0.4;
    // Input order is deliberately reversed; the prompt lists by confidence.
    std::swap(candidates[0], candidates[1]);

    std::map<std::string, std::string> out;
    out["table_linking"] = build_table_prompt(schema, example.question, example.evidence, seed);
    out["column_linking"] = build_column_prompt(schema, {"molecule", "bond"}, example.question, example.evidence, seed);
    out["question_masking"] = build_masking_prompt(sub, example.question, example.evidence);
    out["sql_generation"] = build_generation_prompt(context, fewshot);
    out["sql_selection"] = build_mcs_prompt(candidates, context, fewshot);
    return out;
}

RunConfig desk_config() { return load_config_file(desk_dir() / "config.json"); }

std::unique_ptr<ScriptedDesk> scripted_desk(const nlohmann::json& script) {
    const auto config = desk_config();
    auto desk = std::make_unique<ScriptedDesk>();
    desk->dev = load_benchmark(config.benchmark_root, parse_split(config.split));
    desk->train = load_benchmark(config.benchmark_root, parse_split(config.train_split));
    desk->backend = std::make_shared<ScriptedBackend>(script, std::vector<const Benchmark*>{&desk->dev, &desk->train});
    return desk;
}

std::unique_ptr<ScriptedDesk> scripted_desk() {
    return scripted_desk(nlohmann::json::parse(read_text(desk_dir() / "script.json")));
}

const BenchmarkExample& example_by_id(const Benchmark& bench, std::string_view id) {
    for (const auto& e : bench.examples) {
        if (e.example_id == id) return e;
    }
    throw Error("no example " + std::string(id));
}

void build_timing_db(const fs::path& path, int rows) {
    fs::remove(path);
    sqlite3* raw = nullptr;
    if (sqlite3_open(path.c_str(), &raw) != SQLITE_OK) throw Error("cannot create " + path.string());
    std::unique_ptr<sqlite3, decltype(&sqlite3_close)> db(raw, &sqlite3_close);
    auto exec = [&](const std::string& sql) {
        char* err = nullptr;
        if (sqlite3_exec(db.get(), sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
            std::string msg = err ? err : "unknown";
            sqlite3_free(err);
            throw Error(msg);
        }
    };
    exec("CREATE TABLE t (id INTEGER PRIMARY KEY, grp INTEGER NOT NULL, val INTEGER NOT NULL)");
    exec(fmt::format(
        "WITH RECURSIVE seq(i) AS (SELECT 1 UNION ALL SELECT i + 1 FROM seq WHERE i < {}) "
        "INSERT INTO t (id, grp, val) SELECT i, i % 1000, (i * 37) % 101 FROM seq",
        rows));
    exec("CREATE INDEX t_grp ON t (grp)");
}

}  // namespace mcsql::testing
