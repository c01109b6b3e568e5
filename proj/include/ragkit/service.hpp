#pragma once

#include <atomic>
#include <chrono>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ragkit/config.hpp"
#include "ragkit/conversation.hpp"
#include "ragkit/gateway.hpp"
#include "ragkit/hallucination.hpp"
#include "ragkit/retrieval.hpp"
#include "ragkit/vector_index.hpp"

namespace ragkit::service {

inline constexpr int kSchemaVersion = 1;

class Clock {
public:
    virtual ~Clock() = default;
    virtual double now_ms() = 0;
};

class SteadyClock : public Clock {
public:
    double now_ms() override;
};

// Advances by a fixed step on every reading.
class FakeClock : public Clock {
public:
    explicit FakeClock(double step_ms = 1.0) : step_(step_ms) {}
    double now_ms() override;

private:
    std::mutex mutex_;
    double now_ = 0.0;
    double step_;
};

// Stage durations reported with every answer.
inline const std::vector<std::string> kTimingStages{"rewrite", "embed", "retrieve", "rerank", "generate",
                                                    "hallucination"};

struct Citation {
    std::string chunk_id;
    std::string kb_id;
    double score = 0.0;
};

struct AnswerResponse {
    std::string session_id;
    std::size_t turn = 0;  // 1-based
    std::string query;
    std::string rewritten_query;
    std::string answer;
    std::vector<Citation> citations;
    std::optional<hallucination::RevisionTrace> revision_trace;
    std::map<std::string, double> timing_ms;
    std::map<std::string, std::size_t> prompt_tokens;
    std::vector<std::string> warnings;
};

nlohmann::json to_json(const AnswerResponse& r);

// Gateway failure on a stage without a fallback (embed, generate).
class StageUnavailable : public std::runtime_error {
public:
    StageUnavailable(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct AnswerOptions {
    std::optional<std::size_t> k;
    std::optional<std::vector<std::string>> kbs;
    std::optional<index::FilterExpr> filter;
    bool hallucination_check = true;
};

// rewrite -> embed -> retrieve -> rerank -> generate -> hallucination check,
// then records the turn in the conversation state.
class AnswerEngine {
public:
    AnswerEngine(gateway::ModelGateway gw, std::shared_ptr<index::KbRegistry> registry,
                 retrieval::RetrievalConfig retrieval, conversation::TokenBudget budget,
                 std::shared_ptr<Clock> clock = std::make_shared<SteadyClock>());

    AnswerResponse answer(conversation::ConversationState& state, const std::string& query,
                          const AnswerOptions& options);

    // embed -> retrieve -> rerank without rewriting or timing.
    retrieval::SelectResult retrieve(const std::string& query, const retrieval::RetrievalConfig& config);

    gateway::ModelGateway& gateway() { return gw_; }
    const retrieval::RetrievalConfig& retrieval_config() const { return retrieval_; }
    const index::KbRegistry& registry() const { return *registry_; }

private:
    gateway::ModelGateway gw_;
    std::shared_ptr<index::KbRegistry> registry_;
    retrieval::RetrievalConfig retrieval_;
    conversation::ConversationManager conversation_;
    std::shared_ptr<Clock> clock_;
};

// In-memory sessions with least-recently-used eviction.
class SessionStore {
public:
    struct Session {
        std::mutex mutex;  // serializes the session's turns
        conversation::ConversationState state;
    };

    explicit SessionStore(std::size_t capacity) : capacity_(capacity) {}
    std::shared_ptr<Session> acquire(const std::string& session_id);
    std::size_t size() const;
    bool contains(const std::string& session_id) const;

private:
    mutable std::mutex mutex_;
    std::size_t capacity_;
    std::list<std::string> order_;  // front = most recent
    std::unordered_map<std::string, std::pair<std::shared_ptr<Session>, std::list<std::string>::iterator>> sessions_;
};

struct HttpReply {
    int status = 200;
    std::string body;
};

class Service {
public:
    Service(std::shared_ptr<AnswerEngine> engine, config::ServiceOptions options);
    ~Service();

    HttpReply handle_health() const;
    HttpReply handle_retrieve(const std::string& body);
    HttpReply handle_answer(const std::string& body);

    // Binds and serves until stop(). Port 0 picks a free port.
    void listen(const std::string& host, int port);
    // Serves on a background thread; returns the bound port.
    int start(const std::string& host, int port);
    void stop();

    const SessionStore& sessions() const { return sessions_; }

private:
    struct Impl;
    std::shared_ptr<AnswerEngine> engine_;
    config::ServiceOptions options_;
    SessionStore sessions_;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ragkit::service
