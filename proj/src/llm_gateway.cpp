#include "mcsql/llm_gateway.hpp"

#include "mcsql/common.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <httplib.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace mcsql {

namespace fs = std::filesystem;
using nlohmann::json;

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) {
        throw Error(fmt::format("embedding dimension mismatch: {} vs {}", a.dimension(), b.dimension()));
    }
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

EmbeddingVector normalized(std::vector<double> values) {
    double norm = 0;
    for (double v : values) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0) {
        for (double& v : values) v /= norm;
    }
    return EmbeddingVector{std::move(values)};
}

// ---------------------------------------------------------------------------
// JSON answers

namespace {

// End index (inclusive) of the object opening at `start`, skipping strings
// and // comments.
std::optional<std::size_t> matching_brace(std::string_view text, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
            while (i < text.size() && text[i] != '\n') ++i;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i;
        }
    }
    return std::nullopt;
}

// Drops `//` comments and trailing commas, escapes raw newlines in strings.
std::string relax_json(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_string = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_string) {
            if (c == '\\' && i + 1 < text.size()) {
                out.push_back(c);
                out.push_back(text[++i]);
                continue;
            }
            if (c == '"') in_string = false;
            if (c == '\n') { out += "\\n"; continue; }
            if (c == '\r') continue;
            if (c == '\t') { out += "\\t"; continue; }
            out.push_back(c);
            continue;
        }
        if (c == '"') {
            in_string = true;
            out.push_back(c);
        } else if (c == '/' && i + 1 < text.size() && text[i + 1] == '/') {
            while (i + 1 < text.size() && text[i + 1] != '\n') ++i;
        } else if (c == ',') {
            std::size_t j = i + 1;
            while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
            if (j < text.size() && (text[j] == '}' || text[j] == ']')) continue;
            out.push_back(c);
        } else {
            out.push_back(c);
        }
    }
    return out;
}

std::optional<json> try_parse_object(std::string_view candidate) {
    json j = json::parse(candidate, nullptr, false, true);
    if (j.is_discarded()) j = json::parse(relax_json(candidate), nullptr, false, true);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    return j;
}

}  // namespace

json parse_json_answer(std::string_view text, std::span<const std::string> required_fields) {
    std::optional<std::string> missing;
    for (std::size_t pos = text.find('{'); pos != std::string_view::npos;
         pos = text.find('{', pos + 1)) {
        auto end = matching_brace(text, pos);
        if (!end) continue;
        auto parsed = try_parse_object(text.substr(pos, *end - pos + 1));
        if (!parsed) continue;
        auto absent = std::find_if(required_fields.begin(), required_fields.end(),
                                   [&](const std::string& f) { return !parsed->contains(f); });
        if (absent == required_fields.end()) return *parsed;
        if (!missing) missing = *absent;
    }
    if (missing) throw ParseError(fmt::format("answer is missing field '{}'", *missing), std::string(text));
    throw ParseError("no JSON object found in answer", std::string(text));
}

void parse_completions(std::vector<LlmCompletion>& completions,
                       std::span<const std::string> required_fields) {
    for (auto& c : completions) {
        c.parsed.reset();
        c.parse_error.reset();
        try {
            c.parsed = parse_json_answer(c.raw_text, required_fields);
        } catch (const ParseError& e) {
            c.parse_error = e.what();
        }
    }
}

std::string stage_of(std::string_view tag) {
    auto slash = tag.find('/');
    return std::string(slash == std::string_view::npos ? tag : tag.substr(0, slash));
}

// ---------------------------------------------------------------------------
// HTTP backend

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
    const std::string& url = options_.base_url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("api base url needs a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

json HttpBackend::post(const std::string& path, const json& body) {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(std::chrono::seconds(10));
    client.set_read_timeout(options_.request_timeout);
    client.set_write_timeout(options_.request_timeout);
    httplib::Headers headers;
    if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(options_.backoff_base * (1 << (attempt - 2)));
        }
        auto res = client.Post(path_prefix_ + path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            json j = json::parse(res->body, nullptr, false);
            if (j.is_discarded()) throw GatewayError("unparseable response body from " + path);
            return j;
        }
        last_error = fmt::format("HTTP {}: {}", res->status, res->body.substr(0, 300));
        if (res->status != 429 && res->status < 500) break;
    }
    throw GatewayError(fmt::format("{} failed: {}", path, last_error));
}

std::vector<std::string> HttpBackend::complete(const LlmRequest& request, const std::string& model,
                                               const std::string&) {
    json body = {{"model", model},
                 {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
                 {"n", request.n},
                 {"temperature", request.temperature},
                 {"max_tokens", request.max_output_tokens}};
    json response = post("/chat/completions", body);
    std::vector<std::string> out;
    try {
        for (const auto& choice : response.at("choices")) {
            const auto& content = choice.at("message").at("content");
            out.push_back(content.is_string() ? content.get<std::string>() : std::string());
        }
    } catch (const json::exception& e) {
        throw GatewayError(std::string("malformed chat response: ") + e.what());
    }
    return out;
}

std::vector<std::vector<double>> HttpBackend::embed(std::span<const std::string> texts,
                                                    const std::string& model,
                                                    std::span<const std::string>) {
    json body = {{"model", model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
    json response = post("/embeddings", body);
    std::vector<std::vector<double>> out(texts.size());
    try {
        for (const auto& item : response.at("data")) {
            auto idx = item.at("index").get<std::size_t>();
            if (idx >= out.size()) throw GatewayError("embedding index out of range");
            out[idx] = item.at("embedding").get<std::vector<double>>();
        }
    } catch (const json::exception& e) {
        throw GatewayError(std::string("malformed embedding response: ") + e.what());
    }
    for (const auto& v : out) {
        if (v.empty()) throw GatewayError("embedding response is missing entries");
    }
    return out;
}

// ---------------------------------------------------------------------------
// On-disk store

namespace {

void atomic_write(const fs::path& path, const std::string& contents) {
    fs::create_directories(path.parent_path());
    static std::atomic<unsigned> counter{0};
    fs::path tmp = path;
    tmp += fmt::format(".tmp.{}.{}", std::hash<std::thread::id>{}(std::this_thread::get_id()),
                       counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw GatewayError("cannot write " + tmp.string());
        out << contents;
    }
    fs::rename(tmp, path);
}

std::optional<json> read_entry(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    json j = json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
}

}  // namespace

ResponseStore::ResponseStore(fs::path dir) : dir_(std::move(dir)) {}

std::optional<std::vector<std::string>> ResponseStore::load_completions(const std::string& hash) const {
    auto j = read_entry(dir_ / "chat" / (hash + ".json"));
    if (!j || !j->contains("completions")) return std::nullopt;
    return j->at("completions").get<std::vector<std::string>>();
}

std::optional<std::vector<double>> ResponseStore::load_embedding(const std::string& hash) const {
    auto j = read_entry(dir_ / "embed" / (hash + ".json"));
    if (!j || !j->contains("vector")) return std::nullopt;
    return j->at("vector").get<std::vector<double>>();
}

void ResponseStore::store_completions(const std::string& hash, const LlmRequest& request,
                                      const std::string& model,
                                      const std::vector<std::string>& completions) {
    json entry = {{"version", kFormatVersion},
                  {"hash", hash},
                  {"request",
                   {{"model", model},
                    {"n", request.n},
                    {"temperature", request.temperature},
                    {"tag", request.tag},
                    {"prompt", request.prompt}}},
                  {"completions", completions}};
    atomic_write(dir_ / "chat" / (hash + ".json"), entry.dump(1) + "\n");
}

void ResponseStore::store_embedding(const std::string& hash, const std::string& text,
                                    const std::string& model, const std::vector<double>& values) {
    json entry = {{"version", kFormatVersion},
                  {"hash", hash},
                  {"request", {{"model", model}, {"tag", "embed"}, {"text", text}}},
                  {"vector", values}};
    atomic_write(dir_ / "embed" / (hash + ".json"), entry.dump() + "\n");
}

// ---------------------------------------------------------------------------
// Replay

ReplayBackend::ReplayBackend(fs::path fixture_dir, bool strict)
    : store_(std::move(fixture_dir)), strict_(strict) {}

std::vector<std::string> ReplayBackend::complete(const LlmRequest& request, const std::string&,
                                                 const std::string& request_hash) {
    auto hit = store_.load_completions(request_hash);
    if (!hit) {
        ++misses_;
        if (strict_) throw FixtureMissingError(request_hash);
        return {};
    }
    if (hit->size() > static_cast<std::size_t>(request.n)) hit->resize(static_cast<std::size_t>(request.n));
    return *hit;
}

std::vector<std::vector<double>> ReplayBackend::embed(std::span<const std::string>,
                                                      const std::string&,
                                                      std::span<const std::string> text_hashes) {
    std::vector<std::vector<double>> out;
    for (const auto& h : text_hashes) {
        auto hit = store_.load_embedding(h);
        if (!hit) {
            ++misses_;
            // Embeddings cannot degrade gracefully; a miss is always fatal.
            throw FixtureMissingError(h);
        }
        out.push_back(std::move(*hit));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(GatewayOptions options, std::shared_ptr<LlmBackend> backend)
    : options_(std::move(options)),
      backend_(std::move(backend)),
      in_flight_(std::clamp(options_.max_in_flight, 1, 64)) {
    if (!backend_) throw ConfigError("gateway needs a backend");
    if (options_.cache_dir) cache_.emplace(*options_.cache_dir);
}

std::string Gateway::request_hash(const LlmRequest& request) const {
    json key = {{"kind", "chat"},
                {"model", options_.chat_model},
                {"n", request.n},
                {"prompt", request.prompt},
                {"temperature", request.temperature}};
    return sha256_hex(key.dump());
}

std::string Gateway::embedding_hash(const std::string& text) const {
    json key = {{"kind", "embed"}, {"model", options_.embedding_model}, {"text", text}};
    return sha256_hex(key.dump());
}

std::vector<LlmCompletion> Gateway::complete(const LlmRequest& request) {
    if (request.n < 1) throw GatewayError("request.n must be >= 1");
    if (request.prompt.empty()) throw GatewayError("request prompt is empty");
    const std::string hash = request_hash(request);

    auto to_completions = [](const std::vector<std::string>& texts) {
        std::vector<LlmCompletion> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(LlmCompletion{t, std::nullopt, std::nullopt});
        return out;
    };

    {
        std::lock_guard lock(mutex_);
        if (auto it = chat_memo_.find(hash); it != chat_memo_.end()) {
            ++stats_.cache_hits;
            return to_completions(it->second);
        }
    }
    if (cache_) {
        if (auto hit = cache_->load_completions(hash)) {
            std::lock_guard lock(mutex_);
            ++stats_.cache_hits;
            chat_memo_[hash] = *hit;
            return to_completions(*hit);
        }
    }

    std::vector<std::string> texts;
    {
        in_flight_.acquire();
        struct Release {
            std::counting_semaphore<64>& s;
            ~Release() { s.release(); }
        } release{in_flight_};
        {
            std::lock_guard lock(mutex_);
            ++stats_.backend_calls;
            ++stats_.backend_calls_by_stage[stage_of(request.tag)];
        }
        texts = backend_->complete(request, options_.chat_model, hash);
    }
    if (texts.size() > static_cast<std::size_t>(request.n)) texts.resize(static_cast<std::size_t>(request.n));

    // Empty results (non-strict replay misses) are not cached.
    if (!texts.empty()) {
        if (cache_) cache_->store_completions(hash, request, options_.chat_model, texts);
        std::lock_guard lock(mutex_);
        chat_memo_[hash] = texts;
    }
    return to_completions(texts);
}

std::vector<EmbeddingVector> Gateway::embed(std::span<const std::string> texts) {
    if (texts.empty()) throw GatewayError("embed called with no texts");
    std::vector<std::string> hashes;
    hashes.reserve(texts.size());
    for (const auto& t : texts) hashes.push_back(embedding_hash(t));

    std::vector<std::optional<std::vector<double>>> found(texts.size());
    std::vector<std::size_t> missing;
    {
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (auto it = embed_memo_.find(hashes[i]); it != embed_memo_.end()) {
                found[i] = it->second;
                ++stats_.cache_hits;
            }
        }
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (found[i]) continue;
        if (cache_) {
            if (auto hit = cache_->load_embedding(hashes[i])) {
                found[i] = std::move(*hit);
                std::lock_guard lock(mutex_);
                ++stats_.cache_hits;
                embed_memo_[hashes[i]] = *found[i];
                continue;
            }
        }
        bool dup = false;
        for (auto m : missing) dup = dup || hashes[m] == hashes[i];
        if (!dup) missing.push_back(i);
    }

    for (std::size_t start = 0; start < missing.size(); start += options_.embed_batch) {
        std::size_t end = std::min(missing.size(), start + options_.embed_batch);
        std::vector<std::string> batch_texts;
        std::vector<std::string> batch_hashes;
        for (std::size_t m = start; m < end; ++m) {
            batch_texts.push_back(texts[missing[m]]);
            batch_hashes.push_back(hashes[missing[m]]);
        }
        std::vector<std::vector<double>> vectors;
        {
            in_flight_.acquire();
            struct Release {
                std::counting_semaphore<64>& s;
                ~Release() { s.release(); }
            } release{in_flight_};
            {
                std::lock_guard lock(mutex_);
                ++stats_.backend_calls;
                ++stats_.backend_calls_by_stage["embed"];
            }
            vectors = backend_->embed(batch_texts, options_.embedding_model, batch_hashes);
        }
        if (vectors.size() != batch_texts.size()) throw GatewayError("embedding count mismatch");
        for (std::size_t b = 0; b < vectors.size(); ++b) {
            if (cache_) {
                cache_->store_embedding(batch_hashes[b], batch_texts[b], options_.embedding_model,
                                        vectors[b]);
            }
            std::lock_guard lock(mutex_);
            embed_memo_[batch_hashes[b]] = vectors[b];
        }
    }

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        const auto& values = found[i] ? *found[i] : embed_memo_.at(hashes[i]);
        out.push_back(normalized(values));
    }
    if (!out.empty()) {
        for (const auto& v : out) {
            if (v.dimension() != out.front().dimension()) {
                throw GatewayError("embedding model returned mixed dimensions");
            }
        }
    }
    return out;
}

GatewayStats Gateway::stats() const {
    std::lock_guard lock(mutex_);
    return stats_;
}

}  // namespace mcsql
