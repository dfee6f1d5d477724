#include "mcsql/common.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace mcsql;

TEST_SUITE("common") {
    TEST_CASE("text helpers") {
        CHECK(trim("  a b \n") == "a b");
        CHECK(trim("") == "");
        CHECK(collapse_whitespace(" SELECT  *\n\tFROM   t ") == "SELECT * FROM t");
        CHECK(to_lower("MoLeCuLe") == "molecule");
        CHECK(iequals("Bond", "bOND"));
        CHECK_FALSE(iequals("bond", "bonds"));
        CHECK(starts_with_icase("SELECT 1", "select"));
        CHECK(split_lines("a\nb\n\nc") == std::vector<std::string>{"a", "b", "", "c"});
    }

    TEST_CASE("sha256 matches the published test vector") {
        CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    TEST_CASE("derived seeds are stable and separate their inputs") {
        const auto a = derive_seed(7, "1", "table", 0);
        CHECK(a == derive_seed(7, "1", "table", 0));
        CHECK(a != derive_seed(7, "1", "table", 1));
        CHECK(a != derive_seed(7, "1", "column", 0));
        CHECK(a != derive_seed(7, "2", "table", 0));
        CHECK(a != derive_seed(8, "1", "table", 0));
        // "1"+"0" must not collide with "10"+"".
        CHECK(derive_seed(0, "1", "0table", 0) != derive_seed(0, "10", "table", 0));
    }

    TEST_CASE("permutation is a deterministic permutation") {
        for (std::size_t n : {0u, 1u, 2u, 7u, 50u}) {
            auto p = permutation(n, 99);
            CHECK(p == permutation(n, 99));
            auto sorted = p;
            std::sort(sorted.begin(), sorted.end());
            std::vector<std::size_t> iota(n);
            std::iota(iota.begin(), iota.end(), 0);
            CHECK(sorted == iota);
        }
        int differing = 0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) differing += permutation(8, seed) != permutation(8, seed + 100);
        CHECK(differing > 15);
    }

    TEST_CASE("hex encoding") {
        const std::uint8_t bytes[] = {0x00, 0xab, 0xff};
        CHECK(hex_encode(bytes) == "00abff");
    }
}
