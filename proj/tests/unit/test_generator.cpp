#include "mcsql/common.hpp"
#include "mcsql/generator.hpp"
#include "mcsql/llm_gateway.hpp"
#include "mcsql/sqlite_db.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace mcsql;
using namespace mcsql::testing;

namespace {

// Two variants with different few-shot items so that their prompts differ.
std::vector<FewShotList> two_variants() {
    std::vector<FewShotList> out(2);
    out[0].variant_index = 0;
    out[0].items.push_back({"100", "How many atoms?", std::nullopt, "SELECT COUNT(*) FROM atom"});
    out[1].variant_index = 1;
    out[1].items.push_back({"101", "How many bonds?", "bonds are rows", "SELECT COUNT(*) FROM bond"});
    return out;
}

}  // namespace

TEST_SUITE("generator") {
    TEST_CASE("sql extraction prefers the json answer") {
        auto a = extract_sql_answer("```json\n{\"reasoning\": \"r\", \"sql\": \"SELECT 1\"}\n```");
        REQUIRE(a);
        CHECK(a->sql == "SELECT 1");
        CHECK(a->reasoning == "r");
        CHECK_FALSE(a->from_fence);

        auto b = extract_sql_answer("Here it is:\n```sql\nSELECT 2\n```\n");
        REQUIRE(b);
        CHECK(b->sql == "SELECT 2\n");
        CHECK(b->from_fence);

        CHECK_FALSE(extract_sql_answer("```sql\nSELECT 1\n```\nor\n```sql\nSELECT 2\n```"));
        CHECK_FALSE(extract_sql_answer("I cannot answer this."));
        // A json object without `sql` falls through to the fence rule.
        CHECK_FALSE(extract_sql_answer("{\"reasoning\": \"r\"}"));
    }

    TEST_CASE("candidate normalization") {
        bool multi = true;
        CHECK(normalize_candidate_sql("  SELECT 1 ;; ", &multi) == "SELECT 1");
        CHECK_FALSE(multi);
        CHECK_FALSE(normalize_candidate_sql(" ; ", &multi));
        CHECK_FALSE(multi);
        CHECK_FALSE(normalize_candidate_sql("SELECT 1; DROP TABLE t", &multi));
        CHECK(multi);
        CHECK(normalize_candidate_sql("SELECT ';' FROM t", nullptr) == "SELECT ';' FROM t");
    }

    TEST_CASE("zero-shot prompt has no examples block") {
        auto dev = load_benchmark(desk_dir(), Split::dev);
        const auto& ex = example_by_id(dev, "2");
        PromptContext ctx{&dev.schema(ex.db_id), nullptr, nullptr, &ex, 0};
        auto p = build_generation_prompt(ctx, FewShotList{});
        CHECK(p.find("<examples>") == std::string::npos);
        CHECK(p.find("### Question: " + ex.question) != std::string::npos);
        CHECK(p.ends_with("### Your Answer:"));
        CHECK(render_fewshot_block(two_variants()[1]).find("# Knowledge Evidence: bonds are rows") !=
              std::string::npos);
    }

    TEST_CASE("sample rows only cover linked columns") {
        auto dev = load_benchmark(desk_dir(), Split::dev);
        const auto& ex = example_by_id(dev, "1");
        const auto& schema = dev.schema(ex.db_id);
        LinkedSchema linked;
        linked.tables["bond"] = {"bond_id", "bond_type"};
        Database db(dev.database_path(ex.db_id));
        PromptContext ctx{&schema, &linked, &db, &ex, 2};
        auto block = render_context_block(ctx);
        CHECK(block.find("# [bond]") != std::string::npos);
        CHECK(block.find("# [molecule]") == std::string::npos);
        CHECK(block.find("bond_id,bond_type\n") != std::string::npos);
    }

    TEST_CASE("malformed, multi-statement and fenced samples are counted per prompt") {
        auto desk = scripted_desk();
        Gateway gw(GatewayOptions{}, desk->backend);
        const auto& ex = example_by_id(desk->dev, "10");
        PromptContext ctx{&desk->dev.schema(ex.db_id), nullptr, nullptr, &ex, 0};
        auto config = desk_config();
        auto result = generate_candidates(gw, ctx, two_variants(), config);
        CHECK(result.prompts.size() == 2);
        CHECK(result.dropped_unparseable == 2);
        CHECK(result.dropped_multi_statement == 2);
        CHECK(result.salvaged_from_fence == 2);
        CHECK(result.dropped_empty == 0);
        REQUIRE(result.candidates.size() == 6);
        for (const auto& c : result.candidates) CHECK(c.sql == ex.gold_sql);
        CHECK(result.candidates[0].prompt_index == 0);
        CHECK(result.candidates[0].sample_index == 2);
        CHECK(result.candidates[3].prompt_index == 1);
        CHECK(candidate_from_json(to_json(result.candidates[4])).sample_index == result.candidates[4].sample_index);
    }

    TEST_CASE("no usable sample is a generation error") {
        nlohmann::json script{{"examples", {{"10", {{"candidates", {{"all", {"<malformed>"}}}}}}}}};
        auto desk = scripted_desk(script);
        Gateway gw(GatewayOptions{}, desk->backend);
        const auto& ex = example_by_id(desk->dev, "10");
        PromptContext ctx{&desk->dev.schema(ex.db_id), nullptr, nullptr, &ex, 0};
        CHECK_THROWS_AS(generate_candidates(gw, ctx, two_variants(), desk_config()), GenerationError);
        CHECK_THROWS_AS(generate_candidates(gw, ctx, {}, desk_config()), GenerationError);
    }
}
