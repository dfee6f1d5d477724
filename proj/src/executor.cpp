#include "mcsql/executor.hpp"

#include "mcsql/common.hpp"
#include "mcsql/sqlite_db.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace mcsql {

std::string_view to_string(ExecStatus s) {
    switch (s) {
        case ExecStatus::ok: return "ok";
        case ExecStatus::syntax_error: return "syntax_error";
        case ExecStatus::runtime_error: return "runtime_error";
        case ExecStatus::timeout: return "timeout";
    }
    return "runtime_error";
}

ExecStatus parse_exec_status(std::string_view text) {
    if (text == "ok") return ExecStatus::ok;
    if (text == "syntax_error") return ExecStatus::syntax_error;
    if (text == "timeout") return ExecStatus::timeout;
    return ExecStatus::runtime_error;
}

std::string ResultFingerprint::hex() const { return hex_encode(digest); }

ResultFingerprint ResultFingerprint::from_hex(std::string_view hex) {
    if (hex.size() != 64) throw Error("fingerprint hex must be 64 characters");
    ResultFingerprint fp;
    auto nibble = [](char c) -> std::uint8_t {
        if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
        if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
        throw Error("bad fingerprint hex digit");
    };
    for (std::size_t i = 0; i < 32; ++i) {
        fp.digest[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
    }
    return fp;
}

// ---------------------------------------------------------------------------
// Fingerprints

namespace {

std::string canonical_cell(const Cell& cell) {
    if (std::holds_alternative<Null>(cell)) return "n";
    if (const auto* i = std::get_if<std::int64_t>(&cell)) return "i" + std::to_string(*i);
    if (const auto* d = std::get_if<double>(&cell)) {
        double x = *d;
        if (std::isnan(x)) return "r:nan";
        if (std::isinf(x)) return x > 0 ? "r:inf" : "r:-inf";
        double rounded = std::round(x * 1e6) / 1e6;
        if (rounded == std::floor(rounded) && std::fabs(rounded) < 9.2e18) {
            return "i" + std::to_string(static_cast<std::int64_t>(rounded));
        }
        std::string text = fmt::format("{:.6f}", rounded);
        if (text == "-0.000000") text = "0.000000";
        return "r" + text;
    }
    const auto& s = std::get<std::string>(cell);
    return fmt::format("t{}:{}", s.size(), s);
}

std::string canonical_row(const Row& row) {
    std::string out;
    for (const auto& cell : row) {
        std::string c = canonical_cell(cell);
        out += std::to_string(c.size());
        out += ':';
        out += c;
    }
    return out;
}

}  // namespace

ResultFingerprint normalize_and_fingerprint(const std::vector<Row>& rows, ResultSemantics semantics) {
    std::vector<std::string> canon;
    canon.reserve(rows.size());
    for (const auto& r : rows) canon.push_back(canonical_row(r));
    std::sort(canon.begin(), canon.end());
    if (semantics == ResultSemantics::set) canon.erase(std::unique(canon.begin(), canon.end()), canon.end());

    std::string payload = fmt::format("mcsql-fp-v{}|{}|{}|", ResultFingerprint::kNormalizationVersion,
                                      semantics == ResultSemantics::set ? "set" : "multiset",
                                      canon.size());
    for (const auto& c : canon) {
        payload += std::to_string(c.size());
        payload += ':';
        payload += c;
    }
    ResultFingerprint fp;
    fp.digest = sha256(payload);
    return fp;
}

// ---------------------------------------------------------------------------
// Statement guards

namespace {

// Offset of the first character that is not whitespace or a comment.
std::size_t skip_space_and_comments(std::string_view sql, std::size_t i) {
    while (i < sql.size()) {
        unsigned char c = static_cast<unsigned char>(sql[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
            while (i < sql.size() && sql[i] != '\n') ++i;
        } else if (c == '/' && i + 1 < sql.size() && sql[i + 1] == '*') {
            auto end = sql.find("*/", i + 2);
            i = end == std::string_view::npos ? sql.size() : end + 2;
        } else {
            break;
        }
    }
    return i;
}

}  // namespace

bool is_single_statement(std::string_view sql) {
    char quote = 0;
    for (std::size_t i = 0; i < sql.size(); ++i) {
        char c = sql[i];
        if (quote) {
            if (c == quote) quote = 0;
            continue;
        }
        if (c == '\'' || c == '"' || c == '`') {
            quote = c;
        } else if (c == '[') {
            quote = ']';
        } else if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
            while (i < sql.size() && sql[i] != '\n') ++i;
        } else if (c == '/' && i + 1 < sql.size() && sql[i + 1] == '*') {
            auto end = sql.find("*/", i + 2);
            i = end == std::string_view::npos ? sql.size() : end + 1;
        } else if (c == ';') {
            std::size_t rest = i + 1;
            for (;;) {
                rest = skip_space_and_comments(sql, rest);
                if (rest < sql.size() && sql[rest] == ';') {
                    ++rest;
                    continue;
                }
                break;
            }
            return rest >= sql.size();
        }
    }
    return true;
}

bool is_read_only_query(std::string_view sql) {
    std::size_t i = skip_space_and_comments(sql, 0);
    while (i < sql.size() && sql[i] == '(') i = skip_space_and_comments(sql, i + 1);
    std::string_view rest = sql.substr(i);
    for (std::string_view kw : {"select", "with", "values"}) {
        if (starts_with_icase(rest, kw) &&
            (rest.size() == kw.size() ||
             !(std::isalnum(static_cast<unsigned char>(rest[kw.size()])) || rest[kw.size()] == '_'))) {
            return true;
        }
    }
    return false;
}

// ---------------------------------------------------------------------------
// Execution

namespace {

struct Deadline {
    std::chrono::steady_clock::time_point at;
    bool fired = false;
};

int progress_callback(void* data) {
    auto* d = static_cast<Deadline*>(data);
    if (std::chrono::steady_clock::now() >= d->at) {
        d->fired = true;
        return 1;
    }
    return 0;
}

Cell read_cell(sqlite3_stmt* stmt, int i) {
    switch (sqlite3_column_type(stmt, i)) {
        case SQLITE_NULL: return Null{};
        case SQLITE_INTEGER: return static_cast<std::int64_t>(sqlite3_column_int64(stmt, i));
        case SQLITE_FLOAT: return sqlite3_column_double(stmt, i);
        default: {
            const auto* p = static_cast<const char*>(sqlite3_column_blob(stmt, i));
            int n = sqlite3_column_bytes(stmt, i);
            return std::string(p ? p : "", static_cast<std::size_t>(n));
        }
    }
}

struct RawRun {
    ExecutionOutcome outcome;
    std::vector<Row> rows;
};

RawRun run_query(const std::filesystem::path& db_path, std::string_view sql, const ExecOptions& options,
                 bool keep_rows) {
    RawRun run;
    auto& out = run.outcome;
    const std::string trimmed = trim(sql);
    if (trimmed.empty()) {
        out.status = ExecStatus::syntax_error;
        out.error_message = "empty query";
        return run;
    }
    if (!is_single_statement(trimmed)) {
        out.status = ExecStatus::runtime_error;
        out.error_message = "rejected: more than one statement";
        return run;
    }
    if (!is_read_only_query(trimmed)) {
        out.status = ExecStatus::runtime_error;
        out.error_message = "rejected: not a SELECT statement";
        return run;
    }

    std::optional<Database> db;
    try {
        db.emplace(db_path, true);
    } catch (const ExecutionError& e) {
        out.status = ExecStatus::runtime_error;
        out.error_message = e.what();
        return run;
    }

    sqlite3_stmt* raw = nullptr;
    const char* tail = nullptr;
    int rc = sqlite3_prepare_v2(db->handle(), trimmed.data(), static_cast<int>(trimmed.size()), &raw, &tail);
    std::unique_ptr<sqlite3_stmt, decltype(&sqlite3_finalize)> stmt(raw, &sqlite3_finalize);
    if (rc != SQLITE_OK || !raw) {
        out.status = ExecStatus::syntax_error;
        out.error_message = sqlite3_errmsg(db->handle());
        return run;
    }
    if (!sqlite3_stmt_readonly(raw)) {
        out.status = ExecStatus::runtime_error;
        out.error_message = "rejected: statement writes to the database";
        return run;
    }

    Deadline deadline{std::chrono::steady_clock::now() + std::chrono::milliseconds(options.timeout_ms)};
    sqlite3_progress_handler(db->handle(), 1000, &progress_callback, &deadline);

    const auto start = std::chrono::steady_clock::now();
    const int ncol = sqlite3_column_count(raw);
    std::int64_t rows = 0;
    std::vector<Row> collected;
    for (;;) {
        rc = sqlite3_step(raw);
        if (rc == SQLITE_ROW) {
            Row row;
            row.reserve(static_cast<std::size_t>(ncol));
            for (int i = 0; i < ncol; ++i) row.push_back(read_cell(raw, i));
            collected.push_back(std::move(row));
            ++rows;
            continue;
        }
        break;
    }
    const auto stop = std::chrono::steady_clock::now();
    sqlite3_progress_handler(db->handle(), 0, nullptr, nullptr);

    if (rc != SQLITE_DONE) {
        if (deadline.fired || rc == SQLITE_INTERRUPT) {
            out.status = ExecStatus::timeout;
            out.error_message = fmt::format("timed out after {} ms", options.timeout_ms);
        } else {
            out.status = ExecStatus::runtime_error;
            out.error_message = sqlite3_errmsg(db->handle());
        }
        return run;
    }

    out.status = ExecStatus::ok;
    out.row_count = rows;
    out.fingerprint = normalize_and_fingerprint(collected, options.semantics);
    if (options.timing == TimingMode::vm_steps) {
        int steps = sqlite3_stmt_status(raw, SQLITE_STMTSTATUS_VM_STEP, 0);
        out.exec_time_ms = static_cast<double>(steps) / 1000.0;
    } else {
        out.exec_time_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    }
    if (keep_rows) run.rows = std::move(collected);
    return run;
}

}  // namespace

ExecutionOutcome execute(const std::filesystem::path& db_path, std::string_view sql,
                         const ExecOptions& options) {
    try {
        return run_query(db_path, sql, options, false).outcome;
    } catch (const std::exception& e) {
        ExecutionOutcome out;
        out.status = ExecStatus::runtime_error;
        out.error_message = e.what();
        return out;
    }
}

std::vector<Row> fetch_rows(const std::filesystem::path& db_path, std::string_view sql) {
    ExecOptions options;
    options.timeout_ms = 60000;
    auto run = run_query(db_path, sql, options, true);
    if (!run.outcome.ok()) throw ExecutionError(run.outcome.error_message);
    return std::move(run.rows);
}

double time_query(const std::filesystem::path& db_path, std::string_view sql, int repeats,
                  const ExecOptions& options) {
    if (repeats < 1) throw ExecutionError("repeats must be >= 1");
    std::vector<double> times;
    for (int r = 0; r < repeats; ++r) {
        auto outcome = execute(db_path, sql, options);
        if (!outcome.ok()) {
            throw ExecutionError(fmt::format("timing run {} failed: {}", r, outcome.error_message));
        }
        times.push_back(*outcome.exec_time_ms);
    }
    if (times.size() >= 2) times.erase(times.begin());
    std::sort(times.begin(), times.end());
    const std::size_t m = times.size() / 2;
    return times.size() % 2 ? times[m] : (times[m - 1] + times[m]) / 2.0;
}

}  // namespace mcsql
