#pragma once

#include "mcsql/config.hpp"
#include "mcsql/executor.hpp"
#include "mcsql/generator.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mcsql {

class Gateway;

struct ScoredCandidate {
    CandidateQuery query;
    ExecutionOutcome outcome;
    double confidence = 0.0;
};

enum class FallbackReason { empty_pool, no_vote_match, single_candidate, below_threshold_fallback };

std::string_view to_string(FallbackReason r);

struct PoolSizes {
    std::size_t raw = 0;
    std::size_t executable = 0;
    std::size_t deduped = 0;
    std::size_t filtered = 0;
};

struct SelectionResult {
    std::optional<std::string> final_sql;
    PoolSizes pool_sizes;
    // Keyed by 1-based position in the rendered candidate list.
    std::map<int, int> vote_tally;
    std::optional<FallbackReason> fallback_reason;
    bool below_threshold_fallback = false;
    bool gateway_failed = false;
    int unparseable_votes = 0;
    int unmatched_votes = 0;
    std::size_t truncated_choices = 0;
    std::vector<ScoredCandidate> rendered;
};

nlohmann::json to_json(const SelectionResult& r);

// confidence_i = |{j : fp_j == fp_i}| / N over the ok outcomes only.
std::vector<ScoredCandidate> score_pool(const std::vector<CandidateQuery>& candidates,
                                        const std::vector<ExecutionOutcome>& outcomes);

// One survivor per fingerprint: minimal exec time, then provenance order.
// Output is ordered by first appearance of each fingerprint in `pool`.
std::vector<ScoredCandidate> dedup_fastest(const std::vector<ScoredCandidate>& pool);

struct FilterResult {
    std::vector<ScoredCandidate> kept;
    bool below_threshold_fallback = false;
};

FilterResult filter_threshold(const std::vector<ScoredCandidate>& deduped, double threshold);

// Descending confidence; ties keep provenance order.
std::vector<ScoredCandidate> order_by_confidence(std::vector<ScoredCandidate> candidates);

std::string build_mcs_prompt(const std::vector<ScoredCandidate>& candidates,
                             const PromptContext& context, const FewShotList& fewshot);

std::string vote_key(std::string_view sql);

struct VoteOutcome {
    std::map<int, int> tally;
    int unparseable = 0;
    int unmatched = 0;
    std::optional<int> winner;  // 1-based, nullopt when nothing matched
};

// Pure majority vote over raw MCS completions against `rendered`
// (descending confidence). Ties: more votes, then higher confidence, then
// earlier position.
VoteOutcome tally_votes(const std::vector<ScoredCandidate>& rendered,
                        const std::vector<std::string>& completions);

// |filtered| == 0 -> no SQL; == 1 -> that SQL; otherwise MCS with n votes.
SelectionResult select_final(Gateway* gateway, const std::vector<ScoredCandidate>& filtered,
                             const PromptContext& context, const FewShotList& fewshot,
                             const RunConfig& config, std::string_view example_id);

// Runs every step above on executed candidates, honouring config.selection.
SelectionResult run_selection(Gateway* gateway, const std::vector<CandidateQuery>& candidates,
                              const std::vector<ExecutionOutcome>& outcomes,
                              const PromptContext& context, const FewShotList& fewshot,
                              const RunConfig& config, std::string_view example_id);

}  // namespace mcsql
