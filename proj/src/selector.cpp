#include "mcsql/selector.hpp"

#include "mcsql/common.hpp"
#include "mcsql/llm_gateway.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>

namespace mcsql {

using nlohmann::json;

std::string_view to_string(FallbackReason r) {
    switch (r) {
        case FallbackReason::empty_pool: return "empty_pool";
        case FallbackReason::no_vote_match: return "no_vote_match";
        case FallbackReason::single_candidate: return "single_candidate";
        case FallbackReason::below_threshold_fallback: return "below_threshold_fallback";
    }
    return "empty_pool";
}

json to_json(const SelectionResult& r) {
    json rendered = json::array();
    for (const auto& c : r.rendered) {
        rendered.push_back({{"sql", c.query.sql},
                            {"prompt_index", c.query.prompt_index},
                            {"sample_index", c.query.sample_index},
                            {"confidence", c.confidence},
                            {"fingerprint", c.outcome.fingerprint ? json(c.outcome.fingerprint->hex()) : json(nullptr)},
                            {"exec_time_ms", c.outcome.exec_time_ms ? json(*c.outcome.exec_time_ms) : json(nullptr)}});
    }
    json tally = json::object();
    for (const auto& [pos, votes] : r.vote_tally) tally[std::to_string(pos)] = votes;
    return json{{"final_sql", r.final_sql ? json(*r.final_sql) : json(nullptr)},
                {"pool_sizes",
                 {{"raw", r.pool_sizes.raw},
                  {"executable", r.pool_sizes.executable},
                  {"deduped", r.pool_sizes.deduped},
                  {"filtered", r.pool_sizes.filtered}}},
                {"vote_tally", std::move(tally)},
                {"fallback_reason", r.fallback_reason ? json(std::string(to_string(*r.fallback_reason))) : json(nullptr)},
                {"below_threshold_fallback", r.below_threshold_fallback},
                {"gateway_failed", r.gateway_failed},
                {"unparseable_votes", r.unparseable_votes},
                {"unmatched_votes", r.unmatched_votes},
                {"truncated_choices", r.truncated_choices},
                {"rendered", std::move(rendered)}};
}

std::vector<ScoredCandidate> score_pool(const std::vector<CandidateQuery>& candidates,
                                        const std::vector<ExecutionOutcome>& outcomes) {
    if (candidates.size() != outcomes.size()) {
        throw Error(fmt::format("score_pool: {} candidates but {} outcomes", candidates.size(), outcomes.size()));
    }
    std::vector<ScoredCandidate> pool;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (!outcomes[i].ok() || !outcomes[i].fingerprint) continue;
        pool.push_back(ScoredCandidate{candidates[i], outcomes[i], 0.0});
    }
    std::map<ResultFingerprint, std::size_t> group_size;
    for (const auto& c : pool) ++group_size[*c.outcome.fingerprint];
    const double n = static_cast<double>(pool.size());
    for (auto& c : pool) c.confidence = static_cast<double>(group_size[*c.outcome.fingerprint]) / n;
    return pool;
}

namespace {

double time_of(const ScoredCandidate& c) {
    return c.outcome.exec_time_ms.value_or(std::numeric_limits<double>::infinity());
}

bool provenance_before(const ScoredCandidate& a, const ScoredCandidate& b) {
    return std::pair(a.query.prompt_index, a.query.sample_index) <
           std::pair(b.query.prompt_index, b.query.sample_index);
}

}  // namespace

std::vector<ScoredCandidate> dedup_fastest(const std::vector<ScoredCandidate>& pool) {
    std::map<ResultFingerprint, std::size_t> slot;  // fingerprint -> index in out
    std::vector<ScoredCandidate> out;
    for (const auto& c : pool) {
        const auto& fp = *c.outcome.fingerprint;
        auto it = slot.find(fp);
        if (it == slot.end()) {
            slot.emplace(fp, out.size());
            out.push_back(c);
            continue;
        }
        auto& kept = out[it->second];
        const double tc = time_of(c);
        const double tk = time_of(kept);
        if (tc < tk || (tc == tk && provenance_before(c, kept))) kept = c;
    }
    return out;
}

FilterResult filter_threshold(const std::vector<ScoredCandidate>& deduped, double threshold) {
    FilterResult r;
    for (const auto& c : deduped) {
        if (c.confidence >= threshold) r.kept.push_back(c);
    }
    if (r.kept.empty() && !deduped.empty()) {
        r.kept.push_back(order_by_confidence(deduped).front());
        r.below_threshold_fallback = true;
    }
    return r;
}

std::vector<ScoredCandidate> order_by_confidence(std::vector<ScoredCandidate> candidates) {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const ScoredCandidate& a, const ScoredCandidate& b) { return a.confidence > b.confidence; });
    return candidates;
}

std::string build_mcs_prompt(const std::vector<ScoredCandidate>& candidates, const PromptContext& context,
                             const FewShotList& fewshot) {
    if (!context.example) throw Error("prompt context has no example");
    std::string p =
        "### When a DB schema, a question, and a knowledge evidence are given, and up to three SQLite "
        "queries expressing the question are given, please choose the most accurate SQL based on the "
        "Checklist.\n\n";
    p += render_fewshot_block(fewshot);
    p += render_context_block(context);
    p += render_question_block(*context.example);
    p += "\n### Candidate SQLs:\n";
    const auto ordered = order_by_confidence(candidates);
    for (std::size_t i = 0; i < ordered.size(); ++i) p += fmt::format("{}. {}\n", i + 1, ordered[i].query.sql);
    p += "\n### Checklist:\n";
    p += "1. The SQL should accurately represent the question.\n";
    p += "2. The SQL should accurately use the given knowledge evidence.\n";
    p += "3. The SELECT clause should not include any additional columns that are not included in the question.\n";
    p += "4. The order of columns in the SELECT clause must be the same as the order in the question.\n";
    p += "5. Check if the operations are being performed correctly according to the column type.\n";
    p += "\n### Instruction:\n";
    p += "- If the first SQL satisfies all the conditions of the checklist, please choose the first SQL. If not, "
         "move on to the next SQL.\n";
    p += "- If there's no SQL that satisfies all the requirements on the checklist, just choose the first SQL.\n";
    p += "- Provide a detailed step-by-step explanation following the order of the checklist when checking "
         "whether each SQL satisfies the checklist.\n";
    p += "- Your answer should strictly follow the following json format.\n";
    p += "{\n";
    p += "  \"reasoning\": \"\",  // The reasoning steps for choosing the best SQL.\n";
    p += "  \"sql\": \"\",  // The final chosen SQL.\n";
    p += "}\n\n";
    p += "### Your Answer:";
    return p;
}

std::string vote_key(std::string_view sql) {
    std::string s = trim(sql);
    while (!s.empty() && s.back() == ';') s = trim(std::string_view(s).substr(0, s.size() - 1));
    return to_lower(collapse_whitespace(s));
}

VoteOutcome tally_votes(const std::vector<ScoredCandidate>& rendered, const std::vector<std::string>& completions) {
    VoteOutcome out;
    std::map<std::string, int> position;  // vote key -> 1-based position, first wins
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        position.try_emplace(vote_key(rendered[i].query.sql), static_cast<int>(i + 1));
    }
    for (const auto& text : completions) {
        auto answer = extract_sql_answer(text);
        if (!answer) {
            ++out.unparseable;
            continue;
        }
        auto it = position.find(vote_key(answer->sql));
        if (it == position.end()) {
            ++out.unmatched;
            continue;
        }
        ++out.tally[it->second];
    }
    for (const auto& [pos, votes] : out.tally) {
        if (!out.winner) {
            out.winner = pos;
            continue;
        }
        const int best = out.tally.at(*out.winner);
        const double conf = rendered[static_cast<std::size_t>(pos - 1)].confidence;
        const double best_conf = rendered[static_cast<std::size_t>(*out.winner - 1)].confidence;
        // Positions are visited in ascending order, so equal votes and equal
        // confidence keep the earlier one.
        if (votes > best || (votes == best && conf > best_conf)) out.winner = pos;
    }
    return out;
}

SelectionResult select_final(Gateway* gateway, const std::vector<ScoredCandidate>& filtered,
                             const PromptContext& context, const FewShotList& fewshot, const RunConfig& config,
                             std::string_view example_id) {
    SelectionResult r;
    r.pool_sizes.filtered = filtered.size();
    if (filtered.empty()) {
        r.fallback_reason = FallbackReason::empty_pool;
        return r;
    }
    auto ordered = order_by_confidence(filtered);
    if (ordered.size() > static_cast<std::size_t>(config.max_choices)) {
        r.truncated_choices = ordered.size() - static_cast<std::size_t>(config.max_choices);
        ordered.resize(static_cast<std::size_t>(config.max_choices));
    }
    r.rendered = ordered;
    if (ordered.size() == 1 || !gateway) {
        r.final_sql = ordered.front().query.sql;
        r.fallback_reason = FallbackReason::single_candidate;
        if (ordered.size() > 1) r.gateway_failed = true;
        return r;
    }

    LlmRequest request;
    request.prompt = build_mcs_prompt(ordered, context, fewshot);
    request.n = config.n;
    request.temperature = config.temperature;
    request.max_output_tokens = config.max_output_tokens;
    request.tag = fmt::format("select/{}/0", example_id);
    std::vector<std::string> texts;
    try {
        for (auto& c : gateway->complete(request)) texts.push_back(std::move(c.raw_text));
    } catch (const FixtureMissingError&) {
        throw;
    } catch (const GatewayError&) {
        r.gateway_failed = true;
    }

    auto votes = tally_votes(ordered, texts);
    r.vote_tally = votes.tally;
    r.unparseable_votes = votes.unparseable;
    r.unmatched_votes = votes.unmatched;
    if (votes.winner) {
        r.final_sql = ordered[static_cast<std::size_t>(*votes.winner - 1)].query.sql;
    } else {
        r.final_sql = ordered.front().query.sql;
        r.fallback_reason = FallbackReason::no_vote_match;
    }
    return r;
}

SelectionResult run_selection(Gateway* gateway, const std::vector<CandidateQuery>& candidates,
                              const std::vector<ExecutionOutcome>& outcomes, const PromptContext& context,
                              const FewShotList& fewshot, const RunConfig& config, std::string_view example_id) {
    auto scored = score_pool(candidates, outcomes);
    auto deduped = dedup_fastest(scored);

    SelectionResult r;
    if (config.selection == SelectionMode::majority_vote) {
        // Plain self-consistency: the largest execution group wins.
        auto ordered = order_by_confidence(deduped);
        if (ordered.empty()) {
            r.fallback_reason = FallbackReason::empty_pool;
        } else {
            r.final_sql = ordered.front().query.sql;
            r.rendered = {ordered.front()};
        }
        r.pool_sizes.filtered = ordered.size();
    } else {
        FilterResult filtered;
        if (config.selection == SelectionMode::mcs_without_filter) {
            filtered.kept = deduped;
        } else {
            filtered = filter_threshold(deduped, config.threshold);
        }
        r = select_final(gateway, filtered.kept, context, fewshot, config, example_id);
        if (filtered.below_threshold_fallback) {
            r.below_threshold_fallback = true;
            r.fallback_reason = FallbackReason::below_threshold_fallback;
        }
    }
    r.pool_sizes.raw = candidates.size();
    r.pool_sizes.executable = scored.size();
    r.pool_sizes.deduped = deduped.size();
    return r;
}

}  // namespace mcsql
