#include "mcsql/common.hpp"
#include "mcsql/executor.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace mcsql;
using namespace mcsql::testing;

namespace {

ExecOptions vm() {
    ExecOptions o;
    o.timing = TimingMode::vm_steps;
    return o;
}

}  // namespace

TEST_SUITE("executor") {
    TEST_CASE("labelled equivalence pairs") {
        const auto suite = equivalence_suite();
        REQUIRE(suite.size() >= 20);
        for (const auto& c : suite) {
            CAPTURE(c.name);
            CHECK(execution_equivalent(desk_database(c.db_id), c.sql_a, c.sql_b) == c.equivalent);
        }
    }

    TEST_CASE("fingerprint normalization") {
        using R = std::vector<Row>;
        CHECK(normalize_and_fingerprint(R{{std::int64_t{3}}}) == normalize_and_fingerprint(R{{3.0}}));
        CHECK(normalize_and_fingerprint(R{{0.1234564}}) == normalize_and_fingerprint(R{{0.123456}}));
        CHECK(normalize_and_fingerprint(R{{0.1234566}}) != normalize_and_fingerprint(R{{0.123456}}));
        CHECK(normalize_and_fingerprint(R{{Null{}}}) != normalize_and_fingerprint(R{{std::string()}}));
        CHECK(normalize_and_fingerprint(R{{std::string("1")}}) != normalize_and_fingerprint(R{{std::int64_t{1}}}));
        // Length prefixes keep cell boundaries apart.
        CHECK(normalize_and_fingerprint(R{{std::string("ab"), std::string("c")}}) !=
              normalize_and_fingerprint(R{{std::string("a"), std::string("bc")}}));
        CHECK(normalize_and_fingerprint(R{{std::int64_t{1}}, {std::int64_t{2}}}) ==
              normalize_and_fingerprint(R{{std::int64_t{2}}, {std::int64_t{1}}}));
        CHECK(normalize_and_fingerprint(R{{std::int64_t{1}}, {std::int64_t{1}}}) !=
              normalize_and_fingerprint(R{{std::int64_t{1}}}));
        CHECK(normalize_and_fingerprint(R{{std::int64_t{1}}, {std::int64_t{1}}}, ResultSemantics::set) ==
              normalize_and_fingerprint(R{{std::int64_t{1}}}, ResultSemantics::set));
        CHECK(normalize_and_fingerprint(R{}) != normalize_and_fingerprint(R{{Null{}}}));
    }

    TEST_CASE("fingerprint hex round trip") {
        auto fp = normalize_and_fingerprint({{std::string("x")}});
        CHECK(ResultFingerprint::from_hex(fp.hex()) == fp);
        CHECK(fp.hex().size() == 64);
    }

    TEST_CASE("statement guard") {
        CHECK(is_single_statement("SELECT 1"));
        CHECK(is_single_statement("SELECT ';' FROM t"));
        CHECK_FALSE(is_single_statement("SELECT 1; SELECT 2"));
        CHECK(is_read_only_query("WITH x AS (SELECT 1) SELECT * FROM x"));
        CHECK_FALSE(is_read_only_query("DELETE FROM molecule"));
        CHECK_FALSE(is_read_only_query("DROP TABLE bond"));
    }

    TEST_CASE("error statuses") {
        const auto db = desk_database("toxicology");
        CHECK(execute(db, "SELECT FROM bond WHERE", vm()).status == ExecStatus::syntax_error);
        CHECK_FALSE(execute(db, "SELEC 1", vm()).ok());
        auto missing = execute(db, "SELECT nope FROM bond", vm());
        CHECK_FALSE(missing.ok());
        CHECK_FALSE(missing.error_message.empty());
        CHECK_FALSE(execute(db, "DELETE FROM molecule", vm()).ok());
        CHECK_FALSE(execute(db, "SELECT 1; SELECT 2", vm()).ok());
        // Writes never reach the file.
        CHECK(fetch_rows(db, "SELECT COUNT(*) FROM molecule").at(0).at(0) == Cell{std::int64_t{8}});
    }

    TEST_CASE("runaway query hits the timeout") {
        ExecOptions o;
        o.timeout_ms = 100;
        auto r = execute(desk_database("toxicology"),
                         "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c) SELECT COUNT(*) FROM c", o);
        CHECK(r.status == ExecStatus::timeout);
    }

    TEST_CASE("vm_steps timing is deterministic and tracks work") {
        const auto db = desk_database("toxicology");
        const double a = time_query(db, "SELECT * FROM atom", 3, vm());
        CHECK(a == time_query(db, "SELECT * FROM atom", 3, vm()));
        CHECK(a > 0.0);
        CHECK(time_query(db, "SELECT * FROM atom, bond", 3, vm()) > a);
        CHECK_THROWS_AS(time_query(db, "SELECT nope", 1, vm()), ExecutionError);
    }

    TEST_CASE("ok outcome carries rows and time") {
        auto r = execute(desk_database("formula_1"), "SELECT forename FROM drivers WHERE nationality = 'German'", vm());
        REQUIRE(r.ok());
        CHECK(r.row_count == 3);
        REQUIRE(r.exec_time_ms);
        CHECK(*r.exec_time_ms > 0.0);
    }
}
