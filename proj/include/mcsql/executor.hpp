#pragma once

#include "mcsql/config.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mcsql {

enum class ExecStatus { ok, syntax_error, runtime_error, timeout };

std::string_view to_string(ExecStatus s);
ExecStatus parse_exec_status(std::string_view text);

struct ResultFingerprint {
    static constexpr int kNormalizationVersion = 1;

    std::array<std::uint8_t, 32> digest{};
    int normalization_version = kNormalizationVersion;

    std::string hex() const;
    static ResultFingerprint from_hex(std::string_view hex);

    auto operator<=>(const ResultFingerprint&) const = default;
};

struct ExecutionOutcome {
    ExecStatus status = ExecStatus::runtime_error;
    std::optional<ResultFingerprint> fingerprint;
    std::optional<std::int64_t> row_count;
    std::optional<double> exec_time_ms;
    std::string error_message;

    bool ok() const noexcept { return status == ExecStatus::ok; }
};

struct Null {
    bool operator==(const Null&) const = default;
};
using Cell = std::variant<Null, std::int64_t, double, std::string>;
using Row = std::vector<Cell>;

// Cells: integral reals collapse to integers, other reals round to six
// decimals, text compares byte-exact, NULL is its own atom. Rows are compared
// as a sorted multiset; column order inside a row is significant.
ResultFingerprint normalize_and_fingerprint(const std::vector<Row>& rows,
                                            ResultSemantics semantics = ResultSemantics::multiset);

struct ExecOptions {
    int timeout_ms = 5000;
    TimingMode timing = TimingMode::wall_clock;
    ResultSemantics semantics = ResultSemantics::multiset;
};

// Statements that are not a single SELECT/WITH/VALUES are rejected before
// they reach SQLite. Never throws.
ExecutionOutcome execute(const std::filesystem::path& db_path, std::string_view sql,
                         const ExecOptions& options);

// Materialized rows, for tests and CSV export. Throws ExecutionError.
std::vector<Row> fetch_rows(const std::filesystem::path& db_path, std::string_view sql);

// Median of `repeats` executions; the first run is a warm-up when repeats >= 2.
// In vm_steps mode a run "takes" vm_steps / 1000 ms. Throws ExecutionError.
double time_query(const std::filesystem::path& db_path, std::string_view sql, int repeats,
                  const ExecOptions& options);

// Single-statement guard shared with the generator.
bool is_single_statement(std::string_view sql);
bool is_read_only_query(std::string_view sql);

}  // namespace mcsql
