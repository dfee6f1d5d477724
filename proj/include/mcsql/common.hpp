#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mcsql {

// Error hierarchy. Each stage throws the narrowest type so the pipeline can
// decide whether a failure is per-example (recorded) or fatal (exit code).
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

class LoadError : public Error {
  public:
    using Error::Error;
};

class ParseError : public Error {
  public:
    ParseError(std::string message, std::string offending_text)
        : Error(std::move(message)), offending_text_(std::move(offending_text)) {}
    const std::string& offending_text() const noexcept { return offending_text_; }

  private:
    std::string offending_text_;
};

class GatewayError : public Error {
  public:
    using Error::Error;
};

class FixtureMissingError : public GatewayError {
  public:
    explicit FixtureMissingError(std::string request_hash)
        : GatewayError("replay fixture missing for request " + request_hash),
          request_hash_(std::move(request_hash)) {}
    const std::string& request_hash() const noexcept { return request_hash_; }

  private:
    std::string request_hash_;
};

class LinkingError : public Error {
  public:
    using Error::Error;
};

class GenerationError : public Error {
  public:
    using Error::Error;
};

class ExecutionError : public Error {
  public:
    using Error::Error;
};

class StageError : public Error {
  public:
    using Error::Error;
};

// ---- text helpers ----------------------------------------------------------

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
// Collapses every whitespace run to one space and trims both ends.
std::string collapse_whitespace(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
bool starts_with_icase(std::string_view s, std::string_view prefix);

// ---- hashing ---------------------------------------------------------------

std::string sha256_hex(std::string_view data);
std::array<std::uint8_t, 32> sha256(std::string_view data);
std::uint64_t fnv1a64(std::string_view data);

// Seeds for per-prompt permutations: stable across platforms and runs.
std::uint64_t derive_seed(std::uint64_t base_seed, std::string_view example_id,
                          std::string_view stage, int prompt_index);

// splitmix64-driven Fisher-Yates. std::shuffle is not portable bit-for-bit.
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed);

std::string hex_encode(std::span<const std::uint8_t> bytes);

}  // namespace mcsql
