#pragma once

// Deterministic stand-in for a chat/embedding API, driven by a JSON script.
// Used to author replay fixtures and by tests that need controlled answers.

#include "mcsql/bench_data.hpp"
#include "mcsql/llm_gateway.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace mcsql {

inline constexpr std::size_t kScriptedEmbeddingDim = 32;

// Bag of lower-cased word tokens hashed into kScriptedEmbeddingDim signed buckets.
std::vector<double> hashed_bag_of_words(std::string_view text);

// Replaces schema identifiers with [TABLE]/[COLUMN] and literals with [VALUE].
std::string auto_mask(std::string_view question, const DbSchema& schema);

// Script layout, keyed by example id under "examples":
//   "tables":  [per prompt: ["t", ...] | {"samples": [["t"], "<malformed>", ...]}]
//   "columns": same shape with "table.column" names
//   "candidates": {"all" | "<variant>": ["SQL" | "<malformed>" | "<fenced>SQL", ...]}
//   "votes": [1-based position | "literal SQL" | "<malformed>", ...]
//   "mask": "masked question"
// Lists shorter than the sample count are cycled. Missing entries default to
// the gold SQL and its identifiers.
class ScriptedBackend final : public LlmBackend {
  public:
    ScriptedBackend(nlohmann::json script, const std::vector<const Benchmark*>& benchmarks);

    std::vector<std::string> complete(const LlmRequest& request, const std::string& model,
                                      const std::string& request_hash) override;
    std::vector<std::vector<double>> embed(std::span<const std::string> texts, const std::string& model,
                                           std::span<const std::string> text_hashes) override;

    // Requests answered so far, by stage.
    std::map<std::string, std::size_t> calls() const;
    // Chat requests answered so far for one example.
    std::size_t calls_for(const std::string& example_id) const;

  private:
    struct Known {
        const BenchmarkExample* example;
        const DbSchema* schema;
    };

    const nlohmann::json& entry(const std::string& example_id) const;
    std::vector<std::string> link_answers(const Known& k, const std::string& stage, int prompt, int n) const;

    nlohmann::json script_;
    std::map<std::string, Known> examples_;
    mutable std::mutex mutex_;
    std::map<std::string, std::size_t> calls_;
    std::map<std::string, std::size_t> calls_by_example_;
};

}  // namespace mcsql
