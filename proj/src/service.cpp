#include "ragkit/service.hpp"

#include <algorithm>
#include <set>
#include <thread>

#include <httplib.h>

namespace ragkit::service {

using nlohmann::json;

double SteadyClock::now_ms() {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

double FakeClock::now_ms() {
    std::lock_guard lock(mutex_);
    now_ += step_;
    return now_;
}

json to_json(const AnswerResponse& r) {
    json citations = json::array();
    for (const auto& c : r.citations) citations.push_back({{"chunk_id", c.chunk_id}, {"kb_id", c.kb_id}, {"score", c.score}});
    return {{"v", kSchemaVersion},
            {"session_id", r.session_id},
            {"turn", r.turn},
            {"query", r.query},
            {"rewritten_query", r.rewritten_query},
            {"answer", r.answer},
            {"citations", citations},
            {"revision_trace", r.revision_trace ? hallucination::to_json(*r.revision_trace) : json(nullptr)},
            {"timing_ms", r.timing_ms},
            {"prompt_tokens", r.prompt_tokens},
            {"warnings", r.warnings}};
}

// ============================================================================
// AnswerEngine
// ============================================================================

AnswerEngine::AnswerEngine(gateway::ModelGateway gw, std::shared_ptr<index::KbRegistry> registry,
                           retrieval::RetrievalConfig retrieval, conversation::TokenBudget budget,
                           std::shared_ptr<Clock> clock)
    : gw_(std::move(gw)),
      registry_(std::move(registry)),
      retrieval_(std::move(retrieval)),
      conversation_(gw_, budget),
      clock_(std::move(clock)) {
    retrieval_.validate();
}

namespace {

// Runs fn and stores its duration under `stage`.
template <class Fn>
auto timed(Clock& clock, std::map<std::string, double>& timing, const std::string& stage, Fn&& fn) {
    const double start = clock.now_ms();
    struct Stop {
        Clock& clock;
        std::map<std::string, double>& timing;
        const std::string& stage;
        double start;
        ~Stop() { timing[stage] = clock.now_ms() - start; }
    } stop{clock, timing, stage, start};
    return fn();
}

}  // namespace

retrieval::SelectResult AnswerEngine::retrieve(const std::string& query, const retrieval::RetrievalConfig& config) {
    auto found = retrieval::retrieve(gw_, *registry_, query, config);
    auto selected = retrieval::rerank_and_select(gw_, query, std::move(found.pool), config.k, config.rerank_scope);
    return selected;
}

AnswerResponse AnswerEngine::answer(conversation::ConversationState& state, const std::string& query,
                                    const AnswerOptions& options) {
    AnswerResponse r;
    r.session_id = state.session_id;
    r.turn = state.turns.size() + 1;
    r.query = query;
    for (const auto& stage : kTimingStages) r.timing_ms[stage] = 0.0;

    auto config = retrieval_;
    if (options.k) config.k = *options.k;
    if (options.kbs) config.kbs = *options.kbs;
    if (options.filter) config.filter = *options.filter;
    config.validate();

    retrieval::ConversationContext ctx;
    ctx.summary = state.summary;
    if (!state.turns.empty()) ctx.previous_turn = state.turns.back().text();

    const auto rewrite = timed(*clock_, r.timing_ms, "rewrite", [&] { return retrieval::rewrite_query(gw_, query, ctx); });
    r.rewritten_query = rewrite.query;
    if (rewrite.fallback) r.warnings.push_back(rewrite.warning);

    const auto vector = timed(*clock_, r.timing_ms, "embed", [&] {
        try {
            return gw_.embed({rewrite.query}).at(0);
        } catch (const gateway::GatewayError& e) {
            throw StageUnavailable("embed", e.what());
        }
    });
    auto found = timed(*clock_, r.timing_ms, "retrieve", [&] { return retrieval::search(*registry_, vector, config); });
    r.warnings.insert(r.warnings.end(), found.warnings.begin(), found.warnings.end());
    auto selected = timed(*clock_, r.timing_ms, "rerank", [&] {
        return retrieval::rerank_and_select(gw_, rewrite.query, std::move(found.pool), config.k, config.rerank_scope);
    });
    if (selected.rerank_fallback) r.warnings.push_back(selected.warning);

    std::vector<conversation::ContextChunk> chunks;
    for (const auto& c : selected.selected) chunks.push_back({c.kb_id + ":" + c.chunk_id, c.text, c.embed_score});
    const auto sections = conversation_.assemble_prompt(state, query, chunks);
    r.prompt_tokens = sections.tokens;
    r.warnings.insert(r.warnings.end(), sections.flags.begin(), sections.flags.end());

    std::vector<retrieval::RetrievalCandidate> evidence;
    for (const auto& c : selected.selected) {
        const std::string id = c.kb_id + ":" + c.chunk_id;
        if (std::find(sections.kept_chunks.begin(), sections.kept_chunks.end(), id) != sections.kept_chunks.end()) {
            evidence.push_back(c);
        }
    }

    std::string answer = timed(*clock_, r.timing_ms, "generate", [&] {
        try {
            return gw_.generate("answer_generate", {{"conversation", sections.conversation_text()},
                                                    {"context", sections.context.value_or("")},
                                                    {"query", sections.query.value_or("")}});
        } catch (const gateway::GatewayError& e) {
            throw StageUnavailable("generate", e.what());
        }
    });

    if (options.hallucination_check) {
        hallucination::Pipeline pipeline(gw_, *registry_, config);
        r.revision_trace = timed(*clock_, r.timing_ms, "hallucination",
                                 [&] { return pipeline.run(rewrite.query, answer, evidence); });
        answer = r.revision_trace->final_answer;
        for (const auto& f : r.revision_trace->flags) r.warnings.push_back("hallucination " + f);
    }
    r.answer = answer;
    for (const auto& c : evidence) r.citations.push_back({c.chunk_id, c.kb_id, c.rerank_score.value_or(c.embed_score)});

    conversation::Turn turn{query, answer, {}};
    for (const auto& c : evidence) turn.context_refs.push_back(c.kb_id + ":" + c.chunk_id);
    const std::size_t flags_before = state.flags.size();
    conversation_.record_turn(state, std::move(turn));
    r.warnings.insert(r.warnings.end(), state.flags.begin() + static_cast<std::ptrdiff_t>(flags_before),
                      state.flags.end());
    return r;
}

// ============================================================================
// SessionStore
// ============================================================================

std::shared_ptr<SessionStore::Session> SessionStore::acquire(const std::string& session_id) {
    std::lock_guard lock(mutex_);
    if (auto it = sessions_.find(session_id); it != sessions_.end()) {
        order_.splice(order_.begin(), order_, it->second.second);
        return it->second.first;
    }
    while (sessions_.size() >= capacity_ && !order_.empty()) {
        sessions_.erase(order_.back());
        order_.pop_back();
    }
    auto session = std::make_shared<Session>();
    session->state.session_id = session_id;
    order_.push_front(session_id);
    sessions_.emplace(session_id, std::make_pair(session, order_.begin()));
    return session;
}

std::size_t SessionStore::size() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

bool SessionStore::contains(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    return sessions_.count(session_id) > 0;
}

// ============================================================================
// Service
// ============================================================================

struct Service::Impl {
    httplib::Server server;
    std::thread thread;
};

namespace {

class BadRequest : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

HttpReply error_reply(int status, const std::string& message) {
    return {status, json{{"v", kSchemaVersion}, {"error", message}}.dump()};
}

json parse_body(const std::string& body, const std::set<std::string>& allowed) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw BadRequest("request body must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw BadRequest("unknown field '" + key + "'");
    }
    if (j.contains("v") && j["v"] != kSchemaVersion) throw BadRequest("unsupported schema version");
    if (!j.contains("query") || !j["query"].is_string() || j["query"].get<std::string>().empty()) {
        throw BadRequest("'query' must be a non-empty string");
    }
    return j;
}

AnswerOptions parse_options(const json& j) {
    AnswerOptions o;
    if (j.contains("k")) {
        if (!j["k"].is_number_unsigned() || j["k"].get<std::size_t>() == 0) throw BadRequest("'k' must be a positive integer");
        o.k = j["k"].get<std::size_t>();
    }
    if (j.contains("kbs")) {
        if (!j["kbs"].is_array()) throw BadRequest("'kbs' must be an array of strings");
        std::vector<std::string> kbs;
        for (const auto& kb : j["kbs"]) {
            if (!kb.is_string()) throw BadRequest("'kbs' must be an array of strings");
            kbs.push_back(kb.get<std::string>());
        }
        o.kbs = kbs;
    }
    if (j.contains("filter")) {
        try {
            o.filter = index::FilterExpr::from_json(j["filter"]);
        } catch (const std::exception& e) {
            throw BadRequest(std::string("bad 'filter': ") + e.what());
        }
    }
    return o;
}

void check_kbs(const index::KbRegistry& registry, const retrieval::RetrievalConfig& base, const AnswerOptions& o) {
    for (const auto& kb : o.kbs ? *o.kbs : base.kbs) {
        if (!registry.contains(kb)) throw BadRequest("unknown knowledge base '" + kb + "'");
    }
}

}  // namespace

Service::Service(std::shared_ptr<AnswerEngine> engine, config::ServiceOptions options)
    : engine_(std::move(engine)), options_(std::move(options)), sessions_(options_.max_sessions),
      impl_(std::make_unique<Impl>()) {
    auto& server = impl_->server;
    const std::size_t threads = options_.threads;
    server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    auto send = [](httplib::Response& res, const HttpReply& reply) {
        res.status = reply.status;
        res.set_content(reply.body, "application/json");
    };
    server.Get("/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, handle_health()); });
    server.Post("/retrieve",
                [this, send](const httplib::Request& req, httplib::Response& res) { send(res, handle_retrieve(req.body)); });
    server.Post("/answer",
                [this, send](const httplib::Request& req, httplib::Response& res) { send(res, handle_answer(req.body)); });
}

Service::~Service() { stop(); }

HttpReply Service::handle_health() const { return {200, json{{"v", kSchemaVersion}, {"status", "ok"}}.dump()}; }

HttpReply Service::handle_retrieve(const std::string& body) {
    try {
        const json j = parse_body(body, {"v", "query", "k", "kbs", "filter"});
        const auto o = parse_options(j);
        check_kbs(engine_->registry(), engine_->retrieval_config(), o);
        auto config = engine_->retrieval_config();
        if (o.k) config.k = *o.k;
        if (o.kbs) config.kbs = *o.kbs;
        if (o.filter) config.filter = *o.filter;
        const auto query = j["query"].get<std::string>();
        const auto selected = engine_->retrieve(query, config);
        json candidates = json::array();
        for (const auto& c : selected.selected) candidates.push_back(retrieval::to_json(c));
        json out{{"v", kSchemaVersion},
                 {"query", query},
                 {"candidates", candidates},
                 {"rerank_fallback", selected.rerank_fallback}};
        if (selected.rerank_fallback) out["warnings"] = json::array({selected.warning});
        return {200, out.dump()};
    } catch (const BadRequest& e) {
        return error_reply(400, e.what());
    } catch (const gateway::GatewayError& e) {
        return error_reply(503, e.what());
    } catch (const std::exception& e) {
        return error_reply(500, e.what());
    }
}

HttpReply Service::handle_answer(const std::string& body) {
    try {
        const json j = parse_body(body, {"v", "query", "session_id", "k", "kbs", "filter"});
        auto o = parse_options(j);
        o.hallucination_check = options_.hallucination_check;
        check_kbs(engine_->registry(), engine_->retrieval_config(), o);
        std::string session_id = "default";
        if (j.contains("session_id")) {
            if (!j["session_id"].is_string() || j["session_id"].get<std::string>().empty()) {
                throw BadRequest("'session_id' must be a non-empty string");
            }
            session_id = j["session_id"].get<std::string>();
        }
        auto session = sessions_.acquire(session_id);
        std::lock_guard lock(session->mutex);
        const auto response = engine_->answer(session->state, j["query"].get<std::string>(), o);
        return {200, to_json(response).dump()};
    } catch (const BadRequest& e) {
        return error_reply(400, e.what());
    } catch (const StageUnavailable& e) {
        return error_reply(503, e.what());
    } catch (const gateway::GatewayError& e) {
        return error_reply(503, e.what());
    } catch (const std::exception& e) {
        return error_reply(500, e.what());
    }
}

void Service::listen(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

int Service::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void Service::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace ragkit::service
