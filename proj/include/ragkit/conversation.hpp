#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ragkit/gateway.hpp"

namespace ragkit::conversation {

// Per-section caps in tokens. The remainder of a 128k window is left for the
// system prompt.
struct TokenBudget {
    std::size_t query = 30000;
    std::size_t context = 7000;
    std::size_t summary = 5000;
    std::size_t response = 15000;
    std::size_t previous_turn = 57000;

    void validate() const;
    std::size_t total() const { return query + context + summary + response + previous_turn; }
    static TokenBudget from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// count("") must be 0 and count(a + " " + b) >= count(a).
class TokenCounter {
public:
    virtual ~TokenCounter() = default;
    virtual std::size_t count(std::string_view text) const = 0;
};

// ceil(whitespace words * 4 / 3).
class ApproxTokenCounter : public TokenCounter {
public:
    std::size_t count(std::string_view text) const override;
};

// Longest word prefix of text within budget.
std::string truncate_head(std::string_view text, std::size_t budget, const TokenCounter& counter);
// Head and tail words around a "[...]" marker, within budget.
std::string truncate_middle(std::string_view text, std::size_t budget, const TokenCounter& counter);

struct Turn {
    std::string query;
    std::string answer;
    std::vector<std::string> context_refs;

    std::string text() const;  // "User: <query>\n\nAssistant: <answer>"
};

struct ConversationState {
    std::string session_id;
    std::vector<Turn> turns;
    std::string summary;               // covers turns[0 .. summarized_turns)
    std::size_t summarized_turns = 0;  // turns already folded into the summary
    std::size_t summarizer_calls = 0;
    std::vector<std::string> flags;
};

nlohmann::json to_json(const ConversationState& s);

struct ContextChunk {
    std::string id;
    std::string text;
    double similarity = 0.0;
};

struct PromptSections {
    std::optional<std::string> summary;
    std::optional<std::string> previous_turn;
    std::optional<std::string> context;
    std::optional<std::string> query;
    std::vector<std::string> kept_chunks;     // ids, input order
    std::vector<std::string> dropped_chunks;  // ids, in drop order
    std::map<std::string, std::size_t> tokens;
    std::vector<std::string> flags;

    // Summary and previous turn rendered for the answer prompt.
    std::string conversation_text() const;
};

nlohmann::json to_json(const PromptSections& p);

class ConversationManager {
public:
    ConversationManager(gateway::ModelGateway& gw, TokenBudget budget = {},
                        std::shared_ptr<const TokenCounter> counter = std::make_shared<ApproxTokenCounter>());

    PromptSections assemble_prompt(const ConversationState& state, const std::string& query,
                                   const std::vector<ContextChunk>& chunks) const;

    // Folds completed turns older than the most recent one into the summary,
    // one summarize call per turn.
    void update_summary(ConversationState& state) const;

    // Appends a completed turn and updates the summary.
    void record_turn(ConversationState& state, Turn turn) const;

    const TokenBudget& budget() const { return budget_; }
    const TokenCounter& counter() const { return *counter_; }

private:
    std::string summarize_once(const ConversationState& state, const std::string& task, const Turn& turn) const;

    gateway::ModelGateway& gw_;
    TokenBudget budget_;
    std::shared_ptr<const TokenCounter> counter_;
};

}  // namespace ragkit::conversation
