#include "mcsql/common.hpp"
#include "mcsql/fewshot.hpp"
#include "mcsql/llm_gateway.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace mcsql;
using namespace mcsql::testing;

namespace {

ExampleIndex handmade_index(std::size_t n) {
    ExampleIndex index;
    index.dimension = 2;
    for (std::size_t i = 0; i < n; ++i) {
        IndexEntry e;
        e.example_id = "e" + std::to_string(i);
        e.question_vec = normalized({1.0, static_cast<double>(i)});
        e.masked_vec = e.question_vec;
        e.question = "question " + e.example_id;
        e.gold_sql = "SELECT " + std::to_string(i);
        index.entries.push_back(e);
    }
    return index;
}

std::vector<RankedExample> ranked(std::vector<std::size_t> entries) {
    std::vector<RankedExample> out;
    for (auto e : entries) out.push_back({e, 0.0});
    return out;
}

std::vector<std::string> ids(const FewShotList& l) {
    std::vector<std::string> out;
    for (const auto& i : l.items) out.push_back(i.example_id);
    return out;
}

}  // namespace

TEST_SUITE("fewshot") {
    TEST_CASE("top-k agrees with a brute-force cosine scan") {
        std::mt19937_64 rng(11);
        auto index = random_index(rng, 200, 8);
        for (int q = 0; q < 30; ++q) {
            auto query = q % 2 ? random_unit_vector(rng, 8) : index.entries[static_cast<std::size_t>(q)].masked_vec;
            for (int k : {1, 5, 20, 250}) {
                for (auto strategy : {SimilarityStrategy::question, SimilarityStrategy::masked}) {
                    std::vector<std::string> got;
                    for (const auto& r : select_examples(index, query, strategy, k, "ex0000")) {
                        got.push_back(index.entries[r.entry].example_id);
                    }
                    CHECK(got == brute_force_top_k(index, query, strategy, k, "ex0000"));
                }
            }
        }
    }

    TEST_CASE("exact ties fall back to example id") {
        auto index = handmade_index(3);
        for (auto& e : index.entries) e.question_vec = normalized({1.0, 0.0});
        index.entries[0].example_id = "z";
        index.entries[1].example_id = "b";
        index.entries[2].example_id = "m";
        auto top = select_examples(index, normalized({1.0, 0.0}), SimilarityStrategy::question, 3, "");
        REQUIRE(top.size() == 3);
        CHECK(index.entries[top[0].entry].example_id == "b");
        CHECK(index.entries[top[1].entry].example_id == "m");
        CHECK(index.entries[top[2].entry].example_id == "z");
        CHECK(select_examples(index, normalized({1.0, 0.0}), SimilarityStrategy::question, 3, "b").size() == 2);
    }

    TEST_CASE("variant recipes") {
        auto index = handmade_index(6);
        auto variants = compose_variants(index, ranked({0, 1, 2, 3}), ranked({2, 4, 0, 5}), 4, 6);
        REQUIRE(variants.size() == 6);
        CHECK(ids(variants[0]) == std::vector<std::string>{"e0", "e1", "e2", "e3"});
        CHECK(ids(variants[1]) == std::vector<std::string>{"e2", "e4", "e0", "e5"});
        CHECK(ids(variants[2]) == std::vector<std::string>{"e0", "e2", "e1", "e4"});
        CHECK(ids(variants[3]) == std::vector<std::string>{"e2", "e0", "e4", "e1"});
        CHECK(ids(variants[4]) == std::vector<std::string>{"e0", "e2", "e1", "e4"});
        CHECK(ids(variants[5]) == std::vector<std::string>{"e3", "e2", "e1", "e0"});
        for (int v = 0; v < 6; ++v) CHECK(variants[static_cast<std::size_t>(v)].variant_index == v);
        CHECK_THROWS(compose_variants(index, {}, {}, 4, 0));
    }

    TEST_CASE("fewshot list json round trip") {
        FewShotList l;
        l.variant_index = 3;
        l.items.push_back({"1", "q", std::nullopt, "SELECT 1"});
        l.items.push_back({"2", "r", "ev", "SELECT 2"});
        auto back = fewshot_list_from_json(to_json(l));
        CHECK(back.variant_index == 3);
        CHECK(ids(back) == ids(l));
        CHECK_FALSE(back.items[0].evidence);
        CHECK(*back.items[1].evidence == "ev");
    }

    TEST_CASE("masked answer extraction") {
        CHECK(extract_masked_answer("How many [TABLE] are there?") == "How many [TABLE] are there?");
        CHECK(extract_masked_answer("### Masked Question: What is [COLUMN] of [VALUE]?\nextra") ==
              "What is [COLUMN] of [VALUE]?");
        CHECK(extract_masked_answer("```\n\"Which [TABLE]?\"\n```") == "Which [TABLE]?");
        CHECK_FALSE(extract_masked_answer("  \n```\n```"));
    }

    TEST_CASE("index save and load") {
        TempDir tmp("index");
        auto index = handmade_index(4);
        index.model_id = "m";
        index.entries[1].evidence = "ev";
        index.save(tmp / "index.json");
        auto back = ExampleIndex::load(tmp / "index.json");
        REQUIRE(back.entries.size() == 4);
        CHECK(back.model_id == "m");
        CHECK(back.entries[1].evidence == "ev");
        CHECK(back.entries[3].question_vec.values == index.entries[3].question_vec.values);
    }

    TEST_CASE("scripted index excludes nothing from train and masks every question") {
        auto desk = scripted_desk();
        Gateway gw(GatewayOptions{}, desk->backend);
        auto index = build_index(gw, desk->train.examples, desk->train.schemas);
        CHECK(index.entries.size() == desk->train.examples.size());
        CHECK(index.dimension == kScriptedEmbeddingDim);
        CHECK(desk->backend->calls().at("mask") == desk->train.examples.size());
        const auto& ex = example_by_id(desk->dev, "7");
        auto q = embed_query(gw, ex, desk->dev.schema(ex.db_id));
        CHECK_FALSE(q.masking.fell_back);
        CHECK(q.masking.masked.find("[TABLE]") != std::string::npos);
        auto variants = make_prompt_variants(index, ex, q, 4, 5);
        CHECK(variants.size() == 5);
        for (const auto& v : variants) CHECK(v.items.size() == 4);
    }

    TEST_CASE("a failed masking call falls back to the question") {
        class Failing final : public LlmBackend {
          public:
            std::vector<std::string> complete(const LlmRequest&, const std::string&, const std::string&) override {
                throw GatewayError("down");
            }
            std::vector<std::vector<double>> embed(std::span<const std::string> texts, const std::string&,
                                                   std::span<const std::string>) override {
                return std::vector<std::vector<double>>(texts.size(), {1.0, 0.0});
            }
        };
        Gateway gw(GatewayOptions{}, std::make_shared<Failing>());
        auto dev = load_benchmark(desk_dir(), Split::dev);
        const auto& ex = example_by_id(dev, "0");
        auto q = embed_query(gw, ex, dev.schema(ex.db_id));
        CHECK(q.masking.fell_back);
        CHECK(q.masking.masked == ex.question);
    }
}
