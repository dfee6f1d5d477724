#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mcsql {

struct LlmRequest {
    std::string prompt;
    int n = 1;
    double temperature = 0.0;
    int max_output_tokens = 2048;
    // "<stage>/<example_id>/<prompt_index>"; only the stage part is used for
    // accounting, the rest lets scripted backends route requests.
    std::string tag;
};

struct LlmCompletion {
    std::string raw_text;
    std::optional<nlohmann::json> parsed;
    std::optional<std::string> parse_error;
};

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dimension() const noexcept { return values.size(); }
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);
EmbeddingVector normalized(std::vector<double> values);

// Extracts the first JSON object in `text`, tolerating prose, code fences,
// `//` comments and trailing commas. Throws ParseError when no object parses
// or a required field is absent.
nlohmann::json parse_json_answer(std::string_view text,
                                 std::span<const std::string> required_fields);
void parse_completions(std::vector<LlmCompletion>& completions,
                       std::span<const std::string> required_fields);

std::string stage_of(std::string_view tag);

// Transport behind the gateway. Implementations must be thread-safe.
class LlmBackend {
  public:
    virtual ~LlmBackend() = default;
    virtual std::vector<std::string> complete(const LlmRequest& request, const std::string& model,
                                              const std::string& request_hash) = 0;
    virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts,
                                                   const std::string& model,
                                                   std::span<const std::string> text_hashes) = 0;
};

struct HttpBackendOptions {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key;
    int max_attempts = 3;
    std::chrono::milliseconds backoff_base{1000};
    std::chrono::seconds request_timeout{120};
};

// OpenAI-compatible /chat/completions and /embeddings over HTTP(S).
class HttpBackend final : public LlmBackend {
  public:
    explicit HttpBackend(HttpBackendOptions options);

    std::vector<std::string> complete(const LlmRequest& request, const std::string& model,
                                      const std::string& request_hash) override;
    std::vector<std::vector<double>> embed(std::span<const std::string> texts,
                                           const std::string& model,
                                           std::span<const std::string> text_hashes) override;

  private:
    nlohmann::json post(const std::string& path, const nlohmann::json& body);

    HttpBackendOptions options_;
    std::string scheme_host_port_;
    std::string path_prefix_;
};

// Content-addressed on-disk store: chat/<hash>.json and embed/<hash>.json.
// Shared by the cache and by replay fixtures, so an exported cache is a
// replay bundle.
class ResponseStore {
  public:
    static constexpr int kFormatVersion = 1;

    explicit ResponseStore(std::filesystem::path dir);

    const std::filesystem::path& dir() const noexcept { return dir_; }

    std::optional<std::vector<std::string>> load_completions(const std::string& hash) const;
    std::optional<std::vector<double>> load_embedding(const std::string& hash) const;

    void store_completions(const std::string& hash, const LlmRequest& request,
                           const std::string& model, const std::vector<std::string>& completions);
    void store_embedding(const std::string& hash, const std::string& text, const std::string& model,
                         const std::vector<double>& values);

  private:
    std::filesystem::path dir_;
};

// Serves recorded responses. In strict mode a miss throws FixtureMissingError;
// otherwise it yields no completions and counts the miss.
class ReplayBackend final : public LlmBackend {
  public:
    ReplayBackend(std::filesystem::path fixture_dir, bool strict);

    std::vector<std::string> complete(const LlmRequest& request, const std::string& model,
                                      const std::string& request_hash) override;
    std::vector<std::vector<double>> embed(std::span<const std::string> texts,
                                           const std::string& model,
                                           std::span<const std::string> text_hashes) override;

    std::size_t misses() const noexcept { return misses_.load(); }

  private:
    ResponseStore store_;
    bool strict_;
    std::atomic<std::size_t> misses_{0};
};

struct GatewayOptions {
    std::string chat_model = "gpt-4";
    std::string embedding_model = "text-embedding-ada-002";
    std::optional<std::filesystem::path> cache_dir;
    int max_in_flight = 4;
    std::size_t embed_batch = 64;
};

struct GatewayStats {
    std::size_t backend_calls = 0;
    std::size_t cache_hits = 0;
    std::map<std::string, std::size_t> backend_calls_by_stage;
};

class Gateway {
  public:
    Gateway(GatewayOptions options, std::shared_ptr<LlmBackend> backend);

    // Up to request.n completions, served from cache when the same
    // (prompt, n, temperature, model) was seen before.
    std::vector<LlmCompletion> complete(const LlmRequest& request);
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts);

    std::string request_hash(const LlmRequest& request) const;
    std::string embedding_hash(const std::string& text) const;

    GatewayStats stats() const;
    const GatewayOptions& options() const noexcept { return options_; }

  private:
    GatewayOptions options_;
    std::shared_ptr<LlmBackend> backend_;
    std::optional<ResponseStore> cache_;
    std::counting_semaphore<64> in_flight_;

    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::vector<std::string>> chat_memo_;
    std::unordered_map<std::string, std::vector<double>> embed_memo_;
    GatewayStats stats_;
};

}  // namespace mcsql
