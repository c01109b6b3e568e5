#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ragkit::gateway {

using Embedding = std::vector<float>;

enum class ErrorKind { timeout, http_status, malformed, transport, unmatched, rejected };

std::string_view to_string(ErrorKind kind);

class GatewayError : public std::runtime_error {
public:
    GatewayError(ErrorKind kind, const std::string& what, int status = 0)
        : std::runtime_error(what), kind_(kind), status_(status) {}
    ErrorKind kind() const { return kind_; }
    int status() const { return status_; }

private:
    ErrorKind kind_;
    int status_;
};

// A judge or verdict response that does not follow the expected format.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GenerateParams {
    std::string task;  // prompt id the request was rendered from; empty for raw prompts
    std::map<std::string, std::string> vars;
    double temperature = 0.0;
    std::size_t max_tokens = 0;  // 0 = provider default
};

// ============================================================================
// Role interfaces
// ============================================================================

class TextGenerator {
public:
    virtual ~TextGenerator() = default;
    virtual std::string generate(const std::string& prompt, const GenerateParams& params) = 0;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) = 0;
};

class Reranker {
public:
    virtual ~Reranker() = default;
    virtual std::vector<double> rerank(const std::string& query, const std::vector<std::string>& passages) = 0;
};

// ============================================================================
// Call log
// ============================================================================

struct CallRecord {
    std::string role;     // generate | embed | rerank | judge, or "http" for wire attempts
    std::string task;     // prompt id for generate calls
    std::string request;  // rendered prompt, joined texts, or request body
    bool ok = true;
    std::string error;
};

// Appends are serialized; safe to share across threads.
class CallLog {
public:
    void append(CallRecord record);
    std::vector<CallRecord> records() const;
    std::size_t size() const;
    std::size_t count_role(std::string_view role) const;
    std::size_t count_task(std::string_view task) const;
    void clear();

private:
    mutable std::mutex mutex_;
    std::vector<CallRecord> records_;
};

// ============================================================================
// Prompt assets
// ============================================================================

// Templates compiled in from assets/prompts.
const std::map<std::string, std::string>& builtin_prompts();

// Templates keyed by id. Placeholders are "{name}" with name in [a-z_]; other
// braces (JSON examples in the text) are left alone.
class PromptAssets {
public:
    static PromptAssets builtin();

    // Overlays every <id>.txt found in dir.
    void load_dir(const std::filesystem::path& dir);
    void set(const std::string& id, std::string text);

    bool has(const std::string& id) const { return templates_.count(id) > 0; }
    const std::string& get(const std::string& id) const;
    std::vector<std::string> ids() const;
    std::vector<std::string> placeholders(const std::string& id) const;

    // Throws std::invalid_argument when a placeholder has no value.
    std::string render(const std::string& id, const std::map<std::string, std::string>& vars) const;

private:
    std::map<std::string, std::string> templates_;
};

std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars);

// ============================================================================
// Gateway
// ============================================================================

// Bundles one implementation per role with the prompt assets and a log of
// every logical call made through it.
class ModelGateway {
public:
    ModelGateway(std::shared_ptr<TextGenerator> generator, std::shared_ptr<Embedder> embedder,
                 std::shared_ptr<Reranker> reranker, PromptAssets prompts = PromptAssets::builtin());

    // Renders prompt `task` with `vars` and sends it to the generator.
    std::string generate(const std::string& task, const std::map<std::string, std::string>& vars,
                         GenerateParams params = {});
    // Rejects batches whose vectors disagree in dimension or count.
    std::vector<Embedding> embed(const std::vector<std::string>& texts);
    // Rejects score lists of the wrong length or with non-finite values.
    std::vector<double> rerank(const std::string& query, const std::vector<std::string>& passages);

    const PromptAssets& prompts() const { return prompts_; }
    CallLog& log() { return *log_; }
    std::shared_ptr<CallLog> shared_log() const { return log_; }
    std::shared_ptr<TextGenerator> generator() const { return generator_; }

private:
    std::shared_ptr<TextGenerator> generator_;
    std::shared_ptr<Embedder> embedder_;
    std::shared_ptr<Reranker> reranker_;
    PromptAssets prompts_;
    std::shared_ptr<CallLog> log_;
};

// ============================================================================
// Structured responses
// ============================================================================

// First balanced {...} object in `text` that parses as JSON.
std::optional<nlohmann::json> extract_json_object(std::string_view text);

// Accepts {"score": n}, "score: n" or a bare integer, n in 0..5.
int parse_judge_score(std::string_view response);

enum class PairwiseVerdict { a, b, tie };
std::string_view to_string(PairwiseVerdict v);
// Accepts {"winner": "A"|"B"|"tie"} or the bare token.
PairwiseVerdict parse_pairwise_verdict(std::string_view response);

class Judge {
public:
    Judge(std::string name, std::shared_ptr<TextGenerator> generator, PromptAssets prompts = PromptAssets::builtin());

    const std::string& name() const { return name_; }
    // Throws ParseError on an unusable response, GatewayError on transport failure.
    int score(const std::string& question, const std::string& answer, const std::string& reference,
              const std::optional<std::string>& context = std::nullopt);
    PairwiseVerdict compare(const std::string& question, const std::string& reference, const std::string& answer_a,
                            const std::string& answer_b);

private:
    std::string name_;
    std::shared_ptr<TextGenerator> generator_;
    PromptAssets prompts_;
};

// ============================================================================
// Configuration
// ============================================================================

struct Endpoint {
    std::string url;  // http(s)://host[:port]/path, or mock:<kind>
    std::string model;
};

struct GatewayConfig {
    Endpoint generate{"mock:stack", ""};
    Endpoint embed{"mock:hash", ""};
    Endpoint rerank{"mock:lexical", ""};
    std::size_t embed_dim = 256;  // dimension of the hashing mock embedder
    std::size_t timeout_ms = 30000;
    std::size_t retry = 2;
    std::size_t backoff_ms = 250;
    double backoff_factor = 2.0;
    std::string api_key;
    std::string prompt_dir;

    void validate() const;
    static GatewayConfig from_json(const nlohmann::json& j);
    // Never includes api_key.
    nlohmann::json to_json() const;
    // RAGKIT_GENERATE_URL, RAGKIT_EMBED_URL, RAGKIT_RERANK_URL, RAGKIT_API_KEY.
    void apply_env();
};

ModelGateway make_gateway(const GatewayConfig& config);
std::shared_ptr<TextGenerator> make_generator(const Endpoint& endpoint, const GatewayConfig& config);

}  // namespace ragkit::gateway
