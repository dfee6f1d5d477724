#pragma once

#include <sqlite3.h>

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace mcsql {

// Read-only SQLite connection. One in-flight statement at a time.
class Database {
  public:
    explicit Database(const std::filesystem::path& path, bool read_only = true);

    sqlite3* handle() const noexcept { return db_.get(); }
    const std::filesystem::path& path() const noexcept { return path_; }

  private:
    struct Closer {
        void operator()(sqlite3* db) const noexcept { sqlite3_close_v2(db); }
    };
    std::unique_ptr<sqlite3, Closer> db_;
    std::filesystem::path path_;
};

class Statement {
  public:
    // Throws ExecutionError carrying sqlite's message on prepare failure.
    Statement(const Database& db, std::string_view sql);

    sqlite3_stmt* get() const noexcept { return stmt_.get(); }
    // Returns true on SQLITE_ROW, false on SQLITE_DONE, throws otherwise.
    bool step();

  private:
    struct Finalizer {
        void operator()(sqlite3_stmt* s) const noexcept { sqlite3_finalize(s); }
    };
    std::unique_ptr<sqlite3_stmt, Finalizer> stmt_;
    sqlite3* db_;
};

std::string quote_identifier(std::string_view name);

}  // namespace mcsql
