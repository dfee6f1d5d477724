#include "mcsql/sqlite_db.hpp"

#include "mcsql/common.hpp"

namespace mcsql {

Database::Database(const std::filesystem::path& path, bool read_only) : path_(path) {
    if (read_only && !std::filesystem::exists(path)) {
        throw ExecutionError("database file not found: " + path.string());
    }
    sqlite3* raw = nullptr;
    int flags = read_only ? SQLITE_OPEN_READONLY : (SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
    flags |= SQLITE_OPEN_NOMUTEX;
    int rc = sqlite3_open_v2(path.string().c_str(), &raw, flags, nullptr);
    db_.reset(raw);
    if (rc != SQLITE_OK) {
        std::string msg = raw ? sqlite3_errmsg(raw) : "out of memory";
        throw ExecutionError("cannot open " + path.string() + ": " + msg);
    }
    if (read_only) {
        sqlite3_exec(raw, "PRAGMA query_only = 1", nullptr, nullptr, nullptr);
    }
}

Statement::Statement(const Database& db, std::string_view sql) : db_(db.handle()) {
    sqlite3_stmt* raw = nullptr;
    int rc = sqlite3_prepare_v2(db_, sql.data(), static_cast<int>(sql.size()), &raw, nullptr);
    stmt_.reset(raw);
    if (rc != SQLITE_OK) {
        throw ExecutionError(sqlite3_errmsg(db_));
    }
    if (!raw) {
        throw ExecutionError("empty statement");
    }
}

bool Statement::step() {
    int rc = sqlite3_step(stmt_.get());
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw ExecutionError(sqlite3_errmsg(db_));
}

std::string quote_identifier(std::string_view name) {
    std::string out = "\"";
    for (char c : name) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace mcsql
