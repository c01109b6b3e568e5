#include "ragkit/conversation.hpp"

#include <algorithm>
#include <numeric>

#include "ragkit/text_util.hpp"

namespace ragkit::conversation {

using nlohmann::json;

void TokenBudget::validate() const {
    if (query == 0 || context == 0 || summary == 0 || response == 0 || previous_turn == 0) {
        throw std::invalid_argument("every token budget must be positive");
    }
}

TokenBudget TokenBudget::from_json(const json& j) {
    TokenBudget b;
    if (!j.is_object()) throw std::invalid_argument("budget section must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "query") b.query = value.get<std::size_t>();
        else if (key == "context") b.context = value.get<std::size_t>();
        else if (key == "summary") b.summary = value.get<std::size_t>();
        else if (key == "response") b.response = value.get<std::size_t>();
        else if (key == "previous_turn") b.previous_turn = value.get<std::size_t>();
        else throw std::invalid_argument("unknown key budget." + key);
    }
    b.validate();
    return b;
}

json TokenBudget::to_json() const {
    return {{"query", query},
            {"context", context},
            {"summary", summary},
            {"response", response},
            {"previous_turn", previous_turn}};
}

std::size_t ApproxTokenCounter::count(std::string_view text) const {
    const std::size_t words = count_words(text);
    return (words * 4 + 2) / 3;
}

// ============================================================================
// Truncation
// ============================================================================

namespace {

// Largest w in [lo, hi] with fits(w), assuming fits is monotone and fits(lo).
template <class Fits>
std::size_t largest_fitting(std::size_t lo, std::size_t hi, Fits&& fits) {
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo + 1) / 2;
        if (fits(mid)) lo = mid;
        else hi = mid - 1;
    }
    return lo;
}

constexpr std::string_view kElision = "\n[...]\n";

}  // namespace

std::string truncate_head(std::string_view text, std::size_t budget, const TokenCounter& counter) {
    if (counter.count(text) <= budget) return std::string(text);
    const auto spans = word_spans(text);
    auto prefix = [&](std::size_t w) { return w == 0 ? std::string_view{} : text.substr(0, spans[w - 1].end); };
    const std::size_t w =
        largest_fitting(0, spans.size(), [&](std::size_t n) { return counter.count(prefix(n)) <= budget; });
    return std::string(prefix(w));
}

std::string truncate_middle(std::string_view text, std::size_t budget, const TokenCounter& counter) {
    if (counter.count(text) <= budget) return std::string(text);
    const auto spans = word_spans(text);
    auto build = [&](std::size_t w) {
        const std::size_t head = (w + 1) / 2;
        const std::size_t tail = w / 2;
        std::string out;
        if (head) out.append(text.substr(0, spans[head - 1].end));
        out.append(kElision);
        if (tail) out.append(text.substr(spans[spans.size() - tail].start));
        return out;
    };
    if (counter.count(build(0)) > budget) return truncate_head(text, budget, counter);
    const std::size_t w = largest_fitting(0, spans.empty() ? 0 : spans.size() - 1,
                                          [&](std::size_t n) { return counter.count(build(n)) <= budget; });
    return build(w);
}

// ============================================================================
// State
// ============================================================================

std::string Turn::text() const { return "User: " + query + "\n\nAssistant: " + answer; }

json to_json(const ConversationState& s) {
    json turns = json::array();
    for (const auto& t : s.turns) {
        turns.push_back({{"query", t.query}, {"answer", t.answer}, {"context_refs", t.context_refs}});
    }
    return {{"session_id", s.session_id},
            {"turns", turns},
            {"summary", s.summary},
            {"summarized_turns", s.summarized_turns},
            {"summarizer_calls", s.summarizer_calls},
            {"flags", s.flags}};
}

std::string PromptSections::conversation_text() const {
    std::string out;
    if (summary) out += "Summary of earlier conversation:\n" + *summary;
    if (previous_turn) {
        if (!out.empty()) out += "\n\n";
        out += "Previous turn:\n" + *previous_turn;
    }
    return out;
}

json to_json(const PromptSections& p) {
    auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
    return {{"summary", opt(p.summary)},
            {"previous_turn", opt(p.previous_turn)},
            {"context", opt(p.context)},
            {"query", opt(p.query)},
            {"kept_chunks", p.kept_chunks},
            {"dropped_chunks", p.dropped_chunks},
            {"tokens", p.tokens},
            {"flags", p.flags}};
}

// ============================================================================
// Manager
// ============================================================================

ConversationManager::ConversationManager(gateway::ModelGateway& gw, TokenBudget budget,
                                         std::shared_ptr<const TokenCounter> counter)
    : gw_(gw), budget_(budget), counter_(std::move(counter)) {
    budget_.validate();
    if (!counter_) throw std::invalid_argument("token counter must not be null");
}

PromptSections ConversationManager::assemble_prompt(const ConversationState& state, const std::string& query,
                                                    const std::vector<ContextChunk>& chunks) const {
    PromptSections p;
    const auto& c = *counter_;

    if (!state.summary.empty()) {
        p.summary = state.summary;
        if (c.count(*p.summary) > budget_.summary) {
            p.summary = truncate_head(*p.summary, budget_.summary, c);
            p.flags.push_back("summary truncated to budget");
        }
    }

    if (!state.turns.empty()) {
        const std::string last = state.turns.back().text();
        if (c.count(last) <= budget_.previous_turn) {
            p.previous_turn = last;
        } else {
            p.previous_turn = truncate_middle(last, budget_.previous_turn, c);
            p.flags.push_back("previous turn truncated in the middle");
        }
    }

    if (!chunks.empty()) {
        // Drop order: ascending similarity, later input position first on ties.
        std::vector<std::size_t> order(chunks.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (chunks[a].similarity != chunks[b].similarity) return chunks[a].similarity < chunks[b].similarity;
            return a > b;
        });
        std::vector<bool> kept(chunks.size(), true);
        auto joined = [&] {
            std::string out;
            for (std::size_t i = 0; i < chunks.size(); ++i) {
                if (!kept[i]) continue;
                if (!out.empty()) out += "\n\n";
                out += chunks[i].text;
            }
            return out;
        };
        std::string text = joined();
        for (std::size_t next = 0; c.count(text) > budget_.context && next < order.size(); ++next) {
            kept[order[next]] = false;
            p.dropped_chunks.push_back(chunks[order[next]].id);
            text = joined();
        }
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            if (kept[i]) p.kept_chunks.push_back(chunks[i].id);
        }
        if (!p.dropped_chunks.empty()) {
            p.flags.push_back("dropped " + std::to_string(p.dropped_chunks.size()) + " context chunk(s) over budget");
        }
        if (!text.empty()) p.context = std::move(text);
    }

    if (!query.empty()) {
        p.query = query;
        if (c.count(query) > budget_.query) {
            p.query = truncate_head(query, budget_.query, c);
            p.flags.push_back("query truncated to budget");
        }
    }

    if (p.summary) p.tokens["summary"] = c.count(*p.summary);
    if (p.previous_turn) p.tokens["previous_turn"] = c.count(*p.previous_turn);
    if (p.context) p.tokens["context"] = c.count(*p.context);
    if (p.query) p.tokens["query"] = c.count(*p.query);
    return p;
}

std::string ConversationManager::summarize_once(const ConversationState& state, const std::string& task,
                                                const Turn& turn) const {
    return gw_.generate(task, {{"budget", std::to_string(budget_.summary)},
                               {"summary", state.summary},
                               {"turn", turn.text()}});
}

void ConversationManager::update_summary(ConversationState& state) const {
    const std::size_t target = state.turns.empty() ? 0 : state.turns.size() - 1;
    while (state.summarized_turns < target) {
        const Turn& turn = state.turns[state.summarized_turns];
        ++state.summarizer_calls;
        ++state.summarized_turns;
        std::string next;
        try {
            next = std::string(trim(summarize_once(state, "summarize", turn)));
        } catch (const gateway::GatewayError& e) {
            state.flags.push_back("summary update failed (" + std::string(e.what()) + "); previous summary kept");
            continue;
        }
        if (counter_->count(next) > budget_.summary) {
            try {
                auto strict = std::string(trim(summarize_once(state, "summarize_strict", turn)));
                if (!strict.empty()) next = std::move(strict);
            } catch (const gateway::GatewayError&) {
            }
            if (counter_->count(next) > budget_.summary) {
                next = truncate_head(next, budget_.summary, *counter_);
                state.flags.push_back("summary truncated to budget after strict re-prompt");
            }
        }
        state.summary = std::move(next);
    }
}

void ConversationManager::record_turn(ConversationState& state, Turn turn) const {
    state.turns.push_back(std::move(turn));
    update_summary(state);
}

}  // namespace ragkit::conversation
