#include "mcsql/cache_admin.hpp"

#include "mcsql/common.hpp"
#include "mcsql/llm_gateway.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>

namespace mcsql {

namespace fs = std::filesystem;

namespace {

struct Entry {
    fs::path path;
    std::string kind;  // "chat" or "embed"
    std::string stage;
};

std::optional<std::string> entry_stage(const fs::path& path, std::string_view kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    auto doc = nlohmann::json::parse(ss.str(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || doc.value("version", 0) != ResponseStore::kFormatVersion) {
        return std::nullopt;
    }
    if (doc.value("hash", "") != path.stem().string()) return std::nullopt;
    if (kind == "embed") return doc.contains("vector") ? std::optional<std::string>("embed") : std::nullopt;
    if (!doc.contains("completions") || !doc.contains("request")) return std::nullopt;
    return stage_of(doc.at("request").value("tag", ""));
}

std::vector<Entry> scan(const fs::path& dir, std::vector<fs::path>* corrupt) {
    if (!fs::is_directory(dir)) throw Error("cache directory does not exist: " + dir.string());
    std::vector<Entry> out;
    for (const char* kind : {"chat", "embed"}) {
        const auto sub = dir / kind;
        if (!fs::is_directory(sub)) continue;
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(sub)) {
            if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            if (auto stage = entry_stage(f, kind)) {
                out.push_back(Entry{f, kind, *stage});
            } else if (corrupt) {
                corrupt->push_back(f);
            }
        }
    }
    return out;
}

std::size_t copy_entries(const fs::path& from, const fs::path& to) {
    std::size_t copied = 0;
    for (const auto& e : scan(from, nullptr)) {
        const auto dest = to / e.kind / e.path.filename();
        fs::create_directories(dest.parent_path());
        fs::copy_file(e.path, dest, fs::copy_options::overwrite_existing);
        ++copied;
    }
    return copied;
}

}  // namespace

std::size_t CacheStats::total_entries() const {
    std::size_t n = 0;
    for (const auto& [_, b] : by_stage) n += b.entries;
    return n;
}

CacheStats cache_stats(const fs::path& dir) {
    CacheStats stats;
    for (const auto& e : scan(dir, &stats.corrupt)) {
        auto& bucket = stats.by_stage[e.stage];
        ++bucket.entries;
        bucket.bytes += fs::file_size(e.path);
    }
    return stats;
}

std::size_t cache_prune(const fs::path& dir, const std::string& stage) {
    std::size_t removed = 0;
    for (const auto& e : scan(dir, nullptr)) {
        if (e.stage == stage && fs::remove(e.path)) ++removed;
    }
    return removed;
}

std::size_t cache_export(const fs::path& dir, const fs::path& bundle) { return copy_entries(dir, bundle); }

std::size_t cache_import(const fs::path& bundle, const fs::path& dir) { return copy_entries(bundle, dir); }

std::string render_cache_stats(const CacheStats& stats) {
    std::string out = fmt::format("{:<14} {:>8} {:>12}\n", "stage", "entries", "bytes");
    std::size_t entries = 0;
    std::uintmax_t bytes = 0;
    for (const auto& [stage, b] : stats.by_stage) {
        out += fmt::format("{:<14} {:>8} {:>12}\n", stage, b.entries, b.bytes);
        entries += b.entries;
        bytes += b.bytes;
    }
    out += fmt::format("{:<14} {:>8} {:>12}\n", "total", entries, bytes);
    for (const auto& p : stats.corrupt) out += fmt::format("corrupt entry skipped: {}\n", p.string());
    return out;
}

}  // namespace mcsql
