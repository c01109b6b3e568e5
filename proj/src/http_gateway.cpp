#include "ragkit/http_gateway.hpp"

#include <cmath>
#include <thread>

#include <httplib.h>

#include "ragkit/mocks.hpp"

namespace ragkit::gateway {

using nlohmann::json;

HttpSettings HttpSettings::from(const Endpoint& endpoint, const GatewayConfig& config) {
    HttpSettings s;
    s.url = endpoint.url;
    s.model = endpoint.model;
    s.api_key = config.api_key;
    s.timeout = std::chrono::milliseconds(config.timeout_ms);
    s.retry = config.retry;
    s.backoff = std::chrono::milliseconds(config.backoff_ms);
    s.backoff_factor = config.backoff_factor;
    return s;
}

JsonHttpClient::JsonHttpClient(HttpSettings settings, std::shared_ptr<CallLog> attempts)
    : settings_(std::move(settings)),
      attempts_(attempts ? std::move(attempts) : std::make_shared<CallLog>()),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
    const auto scheme_end = settings_.url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint url lacks a scheme: " + settings_.url);
    const auto path_start = settings_.url.find('/', scheme_end + 3);
    origin_ = settings_.url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : settings_.url.substr(path_start);
    if (settings_.timeout.count() <= 0) throw std::invalid_argument("endpoint timeout must be positive");
}

json JsonHttpClient::post(const json& body) {
    const std::string payload = body.dump();
    httplib::Client client(origin_);
    const auto secs = settings_.timeout.count() / 1000;
    const auto usecs = (settings_.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!settings_.api_key.empty()) headers.emplace("Authorization", "Bearer " + settings_.api_key);

    std::chrono::milliseconds delay = settings_.backoff;
    for (std::size_t attempt = 0;; ++attempt) {
        const bool last = attempt >= settings_.retry;
        auto res = client.Post(path_, headers, payload, "application/json");
        if (!res) {
            const auto err = res.error();
            const auto kind = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                                  ? ErrorKind::timeout
                                  : ErrorKind::transport;
            const std::string msg = settings_.url + ": " + httplib::to_string(err);
            attempts_->append({"http", "", payload, false, msg});
            if (last) throw GatewayError(kind, msg);
        } else if (res->status >= 200 && res->status < 300) {
            attempts_->append({"http", "", payload, true, ""});
            auto parsed = json::parse(res->body, nullptr, false);
            if (parsed.is_discarded()) throw GatewayError(ErrorKind::malformed, settings_.url + ": response is not JSON");
            return parsed;
        } else {
            const std::string msg = settings_.url + ": HTTP " + std::to_string(res->status);
            attempts_->append({"http", "", payload, false, msg});
            const bool retryable = res->status == 429 || res->status >= 500;
            if (last || !retryable) throw GatewayError(ErrorKind::http_status, msg, res->status);
        }
        sleeper_(delay);
        delay = std::chrono::milliseconds(
            static_cast<long long>(std::llround(static_cast<double>(delay.count()) * settings_.backoff_factor)));
    }
}

std::string HttpGenerator::generate(const std::string& prompt, const GenerateParams& params) {
    json body{{"model", client_.settings().model},
              {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
              {"temperature", params.temperature}};
    if (params.max_tokens > 0) body["max_tokens"] = params.max_tokens;
    const json res = client_.post(body);
    try {
        return res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw GatewayError(ErrorKind::malformed, "chat response lacks choices[0].message.content");
    }
}

std::vector<Embedding> HttpEmbedder::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) return {};
    const json res = client_.post({{"model", client_.settings().model}, {"texts", texts}});
    std::vector<Embedding> out;
    try {
        out = res.at("vectors").get<std::vector<Embedding>>();
    } catch (const json::exception&) {
        throw GatewayError(ErrorKind::malformed, "embed response lacks a numeric vectors array");
    }
    if (out.size() != texts.size()) throw GatewayError(ErrorKind::malformed, "embed response vector count mismatch");
    for (const auto& v : out) {
        if (v.size() != out.front().size()) throw GatewayError(ErrorKind::malformed, "embed response dimension mismatch");
    }
    return out;
}

std::vector<double> HttpReranker::rerank(const std::string& query, const std::vector<std::string>& passages) {
    if (passages.empty()) return {};
    const json res = client_.post({{"model", client_.settings().model}, {"query", query}, {"passages", passages}});
    std::vector<double> out;
    try {
        out = res.at("scores").get<std::vector<double>>();
    } catch (const json::exception&) {
        throw GatewayError(ErrorKind::malformed, "rerank response lacks a numeric scores array");
    }
    if (out.size() != passages.size()) throw GatewayError(ErrorKind::malformed, "rerank response score count mismatch");
    return out;
}

// ============================================================================
// Factory
// ============================================================================

namespace {

bool is_mock(const std::string& url) { return url.rfind("mock:", 0) == 0; }

}  // namespace

std::shared_ptr<TextGenerator> make_generator(const Endpoint& endpoint, const GatewayConfig& config) {
    if (!is_mock(endpoint.url)) return std::make_shared<HttpGenerator>(HttpSettings::from(endpoint, config));
    const std::string kind = endpoint.url.substr(5);
    if (kind == "stack") return std::make_shared<StackMock>();
    if (kind == "echo") return std::make_shared<EchoGenerator>();
    if (kind == "fail") return std::make_shared<FailingGenerator>();
    return std::make_shared<MockJudgeGenerator>(endpoint.url);
}

ModelGateway make_gateway(const GatewayConfig& config) {
    config.validate();
    auto generator = make_generator(config.generate, config);

    std::shared_ptr<Embedder> embedder;
    if (config.embed.url == "mock:hash") embedder = std::make_shared<HashingEmbedder>(config.embed_dim);
    else if (config.embed.url == "mock:fail") embedder = std::make_shared<FailingEmbedder>();
    else if (is_mock(config.embed.url)) throw std::invalid_argument("unknown embed mock '" + config.embed.url + "'");
    else embedder = std::make_shared<HttpEmbedder>(HttpSettings::from(config.embed, config));

    std::shared_ptr<Reranker> reranker;
    if (config.rerank.url == "mock:lexical") reranker = std::make_shared<LexicalOverlapReranker>();
    else if (config.rerank.url == "mock:constant") reranker = std::make_shared<ConstantReranker>();
    else if (config.rerank.url == "mock:fail") reranker = std::make_shared<FailingReranker>();
    else if (is_mock(config.rerank.url)) throw std::invalid_argument("unknown rerank mock '" + config.rerank.url + "'");
    else reranker = std::make_shared<HttpReranker>(HttpSettings::from(config.rerank, config));

    auto prompts = PromptAssets::builtin();
    if (!config.prompt_dir.empty()) prompts.load_dir(config.prompt_dir);
    return ModelGateway(std::move(generator), std::move(embedder), std::move(reranker), std::move(prompts));
}

}  // namespace ragkit::gateway
