#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mcsql {

struct CacheBucket {
    std::size_t entries = 0;
    std::uintmax_t bytes = 0;
};

struct CacheStats {
    // Keyed by stage tag ("table_link", "generate", ..., "embed").
    std::map<std::string, CacheBucket> by_stage;
    std::vector<std::filesystem::path> corrupt;

    std::size_t total_entries() const;
};

// Maintenance over a ResponseStore directory. Corrupt entries are reported
// and skipped, never deleted.
CacheStats cache_stats(const std::filesystem::path& dir);
std::size_t cache_prune(const std::filesystem::path& dir, const std::string& stage);
// Copies every valid entry; returns the number copied.
std::size_t cache_export(const std::filesystem::path& dir, const std::filesystem::path& bundle);
std::size_t cache_import(const std::filesystem::path& bundle, const std::filesystem::path& dir);

std::string render_cache_stats(const CacheStats& stats);

}  // namespace mcsql
