#pragma once

#include "mcsql/bench_data.hpp"
#include "mcsql/llm_gateway.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mcsql {

struct MaskedQuestion {
    std::string original;
    std::string masked;
    // True when the model answer was unusable and `masked` is the original.
    bool fell_back = false;
};

std::string build_masking_prompt(const DbSchema& schema, std::string_view question,
                                 const std::optional<std::string>& evidence);

// Single temperature-0 call. Throws GatewayError on transport failure; a
// malformed answer falls back to the original question.
MaskedQuestion mask_question(Gateway& gateway, const BenchmarkExample& example,
                             const DbSchema& schema);

// Pulls the masked line out of a completion.
std::optional<std::string> extract_masked_answer(std::string_view completion);

struct IndexEntry {
    std::string example_id;
    EmbeddingVector question_vec;
    EmbeddingVector masked_vec;
    std::string question;
    std::optional<std::string> evidence;
    std::string gold_sql;
};

enum class SimilarityStrategy { question, masked };

struct ExampleIndex {
    static constexpr int kFormatVersion = 1;

    std::vector<IndexEntry> entries;
    std::size_t dimension = 0;
    std::string model_id;

    void save(const std::filesystem::path& path) const;
    static ExampleIndex load(const std::filesystem::path& path);
};

ExampleIndex build_index(Gateway& gateway, const std::vector<BenchmarkExample>& train,
                         const std::map<std::string, DbSchema>& schemas);

struct RankedExample {
    std::size_t entry = 0;  // position in ExampleIndex::entries
    double similarity = 0.0;
};

// Top-k by cosine, descending; ties by example_id ascending.
std::vector<RankedExample> select_examples(const ExampleIndex& index,
                                           const EmbeddingVector& query,
                                           SimilarityStrategy strategy, int k,
                                           std::string_view exclude_id);

struct FewShotItem {
    std::string example_id;
    std::string question;
    std::optional<std::string> evidence;
    std::string gold_sql;
};

struct FewShotList {
    int variant_index = 0;
    std::vector<FewShotItem> items;
};

nlohmann::json to_json(const FewShotList& list);
FewShotList fewshot_list_from_json(const nlohmann::json& j);

// Variant 0: question similarity. 1: masked-question similarity.
// 2: interleave starting with 0's list. 3: interleave starting with 1's list.
// 4: merge by summed rank. Variants past 4 repeat the recipes reversed.
std::vector<FewShotList> compose_variants(const ExampleIndex& index,
                                          const std::vector<RankedExample>& by_question,
                                          const std::vector<RankedExample>& by_masked, int k,
                                          int p_q);

struct QueryEmbeddings {
    EmbeddingVector question;
    EmbeddingVector masked;
    MaskedQuestion masking;
};

QueryEmbeddings embed_query(Gateway& gateway, const BenchmarkExample& example,
                            const DbSchema& schema);

std::vector<FewShotList> make_prompt_variants(const ExampleIndex& index,
                                              const BenchmarkExample& example,
                                              const QueryEmbeddings& query, int k, int p_q);

}  // namespace mcsql
