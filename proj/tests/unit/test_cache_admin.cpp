#include "mcsql/cache_admin.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <fstream>

namespace fs = std::filesystem;
using namespace mcsql;
using namespace mcsql::testing;

namespace {

std::size_t files_in(const fs::path& dir) {
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.is_regular_file();
    return n;
}

}  // namespace

TEST_SUITE("cache_admin") {
    TEST_CASE("stats count the committed replay set by stage") {
        auto stats = cache_stats(desk_dir() / "replay");
        CHECK(stats.total_entries() == 251);
        CHECK(stats.by_stage.at("table_link").entries == 34);
        CHECK(stats.by_stage.at("column_link").entries == 35);
        CHECK(stats.by_stage.at("mask").entries == 28);
        CHECK(stats.by_stage.at("generate").entries == 91);
        CHECK(stats.by_stage.at("select").entries == 8);
        CHECK(stats.by_stage.at("embed").entries == 55);
        CHECK(stats.corrupt.empty());
        CHECK(stats.by_stage.at("select").bytes > 0);
    }

    TEST_CASE("prune, export and import") {
        TempDir tmp("cache");
        fs::copy(desk_dir() / "replay", tmp / "cache", fs::copy_options::recursive);
        CHECK(cache_prune(tmp / "cache", "select") == 8);
        CHECK(cache_prune(tmp / "cache", "select") == 0);
        CHECK(cache_stats(tmp / "cache").total_entries() == 243);

        CHECK(cache_export(tmp / "cache", tmp / "bundle") == 243);
        CHECK(cache_import(tmp / "bundle", tmp / "fresh") == 243);
        auto stats = cache_stats(tmp / "fresh");
        CHECK(stats.total_entries() == 243);
        CHECK(stats.by_stage.count("select") == 0);
    }

    TEST_CASE("corrupt entries are reported and kept") {
        TempDir tmp("corrupt");
        fs::copy(desk_dir() / "replay", tmp / "cache", fs::copy_options::recursive);
        const auto bad = tmp / "cache" / "chat" / "deadbeef.json";
        std::ofstream(bad) << "{ not json";
        auto stats = cache_stats(tmp / "cache");
        REQUIRE(stats.corrupt.size() == 1);
        CHECK(stats.corrupt[0].filename() == "deadbeef.json");
        CHECK(stats.total_entries() == 251);
        CHECK(render_cache_stats(stats).find("corrupt entry skipped") != std::string::npos);

        const auto before = files_in(tmp / "cache");
        cache_prune(tmp / "cache", "generate");
        CHECK(fs::exists(bad));
        CHECK(files_in(tmp / "cache") == before - 91);
        CHECK(cache_export(tmp / "cache", tmp / "bundle") == 251 - 91);
    }
}
