#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>

#include <json.hpp>

#include "ragkit/gateway.hpp"

namespace ragkit::gateway {

struct HttpSettings {
    std::string url;  // http(s)://host[:port]/path
    std::string model;
    std::string api_key;
    std::chrono::milliseconds timeout{30000};
    std::size_t retry = 2;
    std::chrono::milliseconds backoff{250};
    double backoff_factor = 2.0;

    static HttpSettings from(const Endpoint& endpoint, const GatewayConfig& config);
};

// POSTs a JSON body with retries on transport errors, 429 and 5xx, sleeping
// backoff * factor^attempt between attempts. Every attempt is appended to
// the attempt log with role "http".
class JsonHttpClient {
public:
    explicit JsonHttpClient(HttpSettings settings, std::shared_ptr<CallLog> attempts = nullptr);

    nlohmann::json post(const nlohmann::json& body);
    const HttpSettings& settings() const { return settings_; }
    std::shared_ptr<CallLog> attempts() const { return attempts_; }

    // Test hook; defaults to std::this_thread::sleep_for.
    void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) { sleeper_ = std::move(sleeper); }

private:
    HttpSettings settings_;
    std::string origin_;  // scheme://host:port
    std::string path_;
    std::shared_ptr<CallLog> attempts_;
    std::function<void(std::chrono::milliseconds)> sleeper_;
};

// Chat-completions request: {"model", "messages":[{"role":"user","content"}],
// "temperature"[, "max_tokens"]} -> choices[0].message.content.
class HttpGenerator : public TextGenerator {
public:
    explicit HttpGenerator(HttpSettings settings, std::shared_ptr<CallLog> attempts = nullptr)
        : client_(std::move(settings), std::move(attempts)) {}
    std::string generate(const std::string& prompt, const GenerateParams& params) override;
    JsonHttpClient& client() { return client_; }

private:
    JsonHttpClient client_;
};

// {"model", "texts": [...]} -> {"vectors": [[...], ...]}
class HttpEmbedder : public Embedder {
public:
    explicit HttpEmbedder(HttpSettings settings, std::shared_ptr<CallLog> attempts = nullptr)
        : client_(std::move(settings), std::move(attempts)) {}
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;
    JsonHttpClient& client() { return client_; }

private:
    JsonHttpClient client_;
};

// {"model", "query", "passages": [...]} -> {"scores": [...]}
class HttpReranker : public Reranker {
public:
    explicit HttpReranker(HttpSettings settings, std::shared_ptr<CallLog> attempts = nullptr)
        : client_(std::move(settings), std::move(attempts)) {}
    std::vector<double> rerank(const std::string& query, const std::vector<std::string>& passages) override;
    JsonHttpClient& client() { return client_; }

private:
    JsonHttpClient client_;
};

}  // namespace ragkit::gateway
