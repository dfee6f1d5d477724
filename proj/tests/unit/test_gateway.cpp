#include "mcsql/common.hpp"
#include "mcsql/llm_gateway.hpp"
#include "test_support.hpp"

#include <doctest.h>
#include <fmt/format.h>
#include <httplib.h>

#include <atomic>
#include <thread>

using namespace mcsql;
using namespace mcsql::testing;
using nlohmann::json;

namespace {

class CountingBackend final : public LlmBackend {
  public:
    std::atomic<int> chat_calls{0};
    std::atomic<int> embed_calls{0};

    std::vector<std::string> complete(const LlmRequest& request, const std::string&, const std::string&) override {
        ++chat_calls;
        std::vector<std::string> out;
        for (int i = 0; i < request.n + 2; ++i) out.push_back(fmt::format("answer {} to {}", i, request.tag));
        return out;
    }
    std::vector<std::vector<double>> embed(std::span<const std::string> texts, const std::string&,
                                           std::span<const std::string>) override {
        ++embed_calls;
        std::vector<std::vector<double>> out;
        for (const auto& t : texts) out.push_back({static_cast<double>(t.size()), 1.0});
        return out;
    }
};

LlmRequest request(std::string prompt, std::string tag = "generate/1/0", int n = 3) {
    LlmRequest r;
    r.prompt = std::move(prompt);
    r.tag = std::move(tag);
    r.n = n;
    r.temperature = 1.0;
    return r;
}

}  // namespace

TEST_SUITE("gateway") {
    TEST_CASE("json answers are found inside prose, fences and comments") {
        const std::vector<std::string> req = {"tables"};
        CHECK(parse_json_answer("Sure!\n```json\n{\"reasoning\": \"x\", \"tables\": [\"bond\"]}\n```", req)
                  .at("tables")[0] == "bond");
        CHECK(parse_json_answer("{\n  \"reasoning\": \"a\",  // why\n  \"tables\": [\"atom\",],\n}", req)
                  .at("tables")
                  .size() == 1);
        CHECK(parse_json_answer("{\"note\": 1} then {\"tables\": []}", req).contains("tables"));
        CHECK(parse_json_answer("{\"tables\": [\"a // not a comment\"]}", req).at("tables")[0] ==
              "a // not a comment");
        CHECK_THROWS_AS(parse_json_answer("no json here", req), ParseError);
        CHECK_THROWS_AS(parse_json_answer("{\"reasoning\": \"\"}", req), ParseError);
    }

    TEST_CASE("identical requests are served from memory") {
        auto backend = std::make_shared<CountingBackend>();
        Gateway gw(GatewayOptions{}, backend);
        auto a = gw.complete(request("p"));
        auto b = gw.complete(request("p", "generate/1/3"));
        CHECK(backend->chat_calls == 1);
        CHECK(a.size() == 3);  // truncated to n
        CHECK(a[2].raw_text == b[2].raw_text);
        gw.complete(request("p", "generate/1/0", 4));
        CHECK(backend->chat_calls == 2);
        CHECK(gw.stats().cache_hits == 1);
        CHECK(gw.stats().backend_calls_by_stage.at("generate") == 2);
    }

    TEST_CASE("request hash covers prompt, n, temperature and model but not the tag") {
        Gateway gw(GatewayOptions{}, std::make_shared<CountingBackend>());
        const auto base = gw.request_hash(request("p"));
        CHECK(base == gw.request_hash(request("p", "select/9/0")));
        CHECK(base != gw.request_hash(request("q")));
        CHECK(base != gw.request_hash(request("p", "generate/1/0", 4)));
        auto hot = request("p");
        hot.temperature = 0.0;
        CHECK(base != gw.request_hash(hot));
        GatewayOptions other;
        other.chat_model = "another-model";
        CHECK(base != Gateway(other, std::make_shared<CountingBackend>()).request_hash(request("p")));
    }

    TEST_CASE("disk cache survives a new gateway") {
        TempDir tmp("gwcache");
        GatewayOptions o;
        o.cache_dir = tmp.path();
        auto first = std::make_shared<CountingBackend>();
        {
            Gateway gw(o, first);
            gw.complete(request("p"));
            const std::vector<std::string> texts{"x", "yy"};
            gw.embed(texts);
        }
        auto second = std::make_shared<CountingBackend>();
        Gateway gw(o, second);
        auto c = gw.complete(request("p"));
        const std::vector<std::string> texts{"yy", "x"};
        auto e = gw.embed(texts);
        CHECK(second->chat_calls == 0);
        CHECK(second->embed_calls == 0);
        CHECK(c[0].raw_text == "answer 0 to generate/1/0");
        // Stored vectors come back normalized.
        CHECK(e[0].values.size() == 2);
        CHECK(std::abs(cosine(e[0], e[0]) - 1.0) < 1e-12);
    }

    TEST_CASE("strict replay throws on a miss, lenient replay returns nothing") {
        TempDir tmp("replay");
        Gateway strict(GatewayOptions{}, std::make_shared<ReplayBackend>(tmp.path(), true));
        CHECK_THROWS_AS(strict.complete(request("p")), FixtureMissingError);
        auto lenient_backend = std::make_shared<ReplayBackend>(tmp.path(), false);
        Gateway lenient(GatewayOptions{}, lenient_backend);
        CHECK(lenient.complete(request("p")).empty());
        CHECK(lenient_backend->misses() == 1);
        const std::vector<std::string> texts{"t"};
        CHECK_THROWS_AS(lenient.embed(texts), FixtureMissingError);
    }

    TEST_CASE("replay serves what a cache recorded") {
        TempDir tmp("record");
        GatewayOptions o;
        o.cache_dir = tmp.path();
        Gateway recorder(o, std::make_shared<CountingBackend>());
        auto recorded = recorder.complete(request("p"));
        Gateway replay(GatewayOptions{}, std::make_shared<ReplayBackend>(tmp.path(), true));
        auto replayed = replay.complete(request("p", "other/2/0"));
        REQUIRE(replayed.size() == recorded.size());
        CHECK(replayed[1].raw_text == recorded[1].raw_text);
        const auto entry = json::parse(read_text(tmp / "chat" / (recorder.request_hash(request("p")) + ".json")));
        CHECK(entry.at("request").at("tag") == "generate/1/0");
        CHECK(entry.at("version") == ResponseStore::kFormatVersion);
    }

    TEST_CASE("invalid requests are rejected before the backend") {
        auto backend = std::make_shared<CountingBackend>();
        Gateway gw(GatewayOptions{}, backend);
        CHECK_THROWS_AS(gw.complete(request("")), GatewayError);
        CHECK_THROWS_AS(gw.complete(request("p", "generate/1/0", 0)), GatewayError);
        CHECK(backend->chat_calls == 0);
    }

    TEST_CASE("cosine and normalization") {
        auto a = normalized({3.0, 4.0});
        CHECK(a.values[0] == doctest::Approx(0.6));
        CHECK(cosine(a, normalized({6.0, 8.0})) == doctest::Approx(1.0));
        CHECK(cosine(a, normalized({-4.0, 3.0})) == doctest::Approx(0.0));
        CHECK_THROWS(cosine(a, normalized({1.0, 2.0, 3.0})));
    }

    TEST_CASE("stage accounting uses the tag prefix") {
        CHECK(stage_of("table_link/12/2") == "table_link");
        CHECK(stage_of("embed") == "embed");
    }

    TEST_CASE("http backend retries transient failures") {
        httplib::Server server;
        std::atomic<int> chat_hits{0};
        std::atomic<int> bad_hits{0};
        std::string seen_auth;
        server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            if (++chat_hits < 3) {
                res.status = chat_hits == 1 ? 503 : 429;
                res.set_content("busy", "text/plain");
                return;
            }
            seen_auth = req.get_header_value("Authorization");
            auto body = json::parse(req.body);
            json choices = json::array();
            for (int i = 0; i < body.at("n").get<int>(); ++i) {
                choices.push_back({{"index", i}, {"message", {{"role", "assistant"}, {"content", fmt::format("c{}", i)}}}});
            }
            res.set_content(json{{"choices", choices}}.dump(), "application/json");
        });
        server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
            auto body = json::parse(req.body);
            json data = json::array();
            const auto n = body.at("input").size();
            // Out of order on purpose; the client must use "index".
            for (std::size_t i = n; i-- > 0;) data.push_back({{"index", i}, {"embedding", {double(i), 1.0}}});
            res.set_content(json{{"data", data}}.dump(), "application/json");
        });
        server.Post("/bad/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            ++bad_hits;
            res.status = 400;
            res.set_content("{\"error\": \"bad request\"}", "application/json");
        });
        const int port = server.bind_to_any_port("127.0.0.1");
        std::thread worker([&] { server.listen_after_bind(); });
        server.wait_until_ready();

        HttpBackendOptions o;
        o.base_url = fmt::format("http://127.0.0.1:{}/v1/", port);
        o.api_key = "sk-test";
        o.backoff_base = std::chrono::milliseconds(1);
        HttpBackend backend(o);
        auto texts = backend.complete(request("p", "generate/1/0", 2), "m", "h");
        CHECK(texts == std::vector<std::string>{"c0", "c1"});
        CHECK(chat_hits == 3);
        CHECK(seen_auth == "Bearer sk-test");

        const std::vector<std::string> inputs{"a", "b", "c"};
        const std::vector<std::string> hashes{"1", "2", "3"};
        auto vectors = backend.embed(inputs, "e", hashes);
        REQUIRE(vectors.size() == 3);
        CHECK(vectors[2][0] == 2.0);

        HttpBackendOptions bad = o;
        bad.base_url = fmt::format("http://127.0.0.1:{}/bad", port);
        HttpBackend rejecting(bad);
        CHECK_THROWS_AS(rejecting.complete(request("p"), "m", "h"), GatewayError);
        CHECK(bad_hits == 1);  // 4xx other than 429 is not retried

        chat_hits = -100;  // every call now fails with 5xx
        HttpBackendOptions few = o;
        few.max_attempts = 2;
        CHECK_THROWS_AS(HttpBackend(few).complete(request("p"), "m", "h"), GatewayError);
        CHECK(chat_hits == -98);

        server.stop();
        worker.join();
    }
}
