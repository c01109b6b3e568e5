#include "ragkit/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

#include "ragkit/json_lines.hpp"
#include "ragkit/text_util.hpp"

namespace ragkit::gateway {

using nlohmann::json;

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::timeout: return "timeout";
        case ErrorKind::http_status: return "http_status";
        case ErrorKind::malformed: return "malformed";
        case ErrorKind::transport: return "transport";
        case ErrorKind::unmatched: return "unmatched";
        case ErrorKind::rejected: return "rejected";
    }
    return "unknown";
}

// ============================================================================
// CallLog
// ============================================================================

void CallLog::append(CallRecord record) {
    std::lock_guard lock(mutex_);
    records_.push_back(std::move(record));
}

std::vector<CallRecord> CallLog::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::size_t CallLog::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

std::size_t CallLog::count_role(std::string_view role) const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [&](const CallRecord& r) { return r.role == role; }));
}

std::size_t CallLog::count_task(std::string_view task) const {
    std::lock_guard lock(mutex_);
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [&](const CallRecord& r) { return r.task == task; }));
}

void CallLog::clear() {
    std::lock_guard lock(mutex_);
    records_.clear();
}

// ============================================================================
// PromptAssets
// ============================================================================

namespace {

bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Calls fn(start, end, name) for every {name} placeholder.
template <class Fn>
void scan_placeholders(std::string_view text, Fn&& fn) {
    std::size_t i = 0;
    while ((i = text.find('{', i)) != std::string_view::npos) {
        std::size_t j = i + 1;
        while (j < text.size() && is_placeholder_char(text[j])) ++j;
        if (j > i + 1 && j < text.size() && text[j] == '}') {
            fn(i, j + 1, text.substr(i + 1, j - i - 1));
            i = j + 1;
        } else {
            ++i;
        }
    }
}

}  // namespace

std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(text.size());
    std::size_t copied = 0;
    scan_placeholders(text, [&](std::size_t start, std::size_t end, std::string_view name) {
        auto it = vars.find(std::string(name));
        if (it == vars.end()) throw std::invalid_argument("prompt placeholder {" + std::string(name) + "} has no value");
        out.append(text.substr(copied, start - copied));
        out.append(it->second);
        copied = end;
    });
    out.append(text.substr(copied));
    return out;
}

PromptAssets PromptAssets::builtin() {
    PromptAssets assets;
    assets.templates_ = builtin_prompts();
    return assets;
}

void PromptAssets::load_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw std::runtime_error("prompt directory " + dir.string() + " not found");
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".txt") templates_[entry.path().stem().string()] = read_text_file(entry.path());
    }
}

void PromptAssets::set(const std::string& id, std::string text) { templates_[id] = std::move(text); }

const std::string& PromptAssets::get(const std::string& id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) throw std::invalid_argument("unknown prompt id '" + id + "'");
    return it->second;
}

std::vector<std::string> PromptAssets::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, text] : templates_) out.push_back(id);
    return out;
}

std::vector<std::string> PromptAssets::placeholders(const std::string& id) const {
    std::set<std::string> names;
    scan_placeholders(get(id), [&](std::size_t, std::size_t, std::string_view name) { names.emplace(name); });
    return {names.begin(), names.end()};
}

std::string PromptAssets::render(const std::string& id, const std::map<std::string, std::string>& vars) const {
    return render_template(get(id), vars);
}

// ============================================================================
// ModelGateway
// ============================================================================

ModelGateway::ModelGateway(std::shared_ptr<TextGenerator> generator, std::shared_ptr<Embedder> embedder,
                           std::shared_ptr<Reranker> reranker, PromptAssets prompts)
    : generator_(std::move(generator)),
      embedder_(std::move(embedder)),
      reranker_(std::move(reranker)),
      prompts_(std::move(prompts)),
      log_(std::make_shared<CallLog>()) {}

std::string ModelGateway::generate(const std::string& task, const std::map<std::string, std::string>& vars,
                                   GenerateParams params) {
    if (!generator_) throw GatewayError(ErrorKind::rejected, "no generator configured");
    params.task = task;
    params.vars = vars;
    const std::string prompt = prompts_.render(task, vars);
    try {
        std::string out = generator_->generate(prompt, params);
        log_->append({"generate", task, prompt, true, ""});
        return out;
    } catch (const std::exception& e) {
        log_->append({"generate", task, prompt, false, e.what()});
        throw;
    }
}

std::vector<Embedding> ModelGateway::embed(const std::vector<std::string>& texts) {
    if (!embedder_) throw GatewayError(ErrorKind::rejected, "no embedder configured");
    std::string joined;
    for (const auto& t : texts) {
        if (!joined.empty()) joined.push_back('\n');
        joined += t;
    }
    if (texts.empty()) return {};
    try {
        auto vectors = embedder_->embed(texts);
        if (vectors.size() != texts.size()) {
            throw GatewayError(ErrorKind::malformed, "embedder returned " + std::to_string(vectors.size()) +
                                                         " vectors for " + std::to_string(texts.size()) + " texts");
        }
        for (const auto& v : vectors) {
            if (v.size() != vectors.front().size() || v.empty()) {
                throw GatewayError(ErrorKind::malformed, "embedder returned vectors of inconsistent dimension");
            }
        }
        log_->append({"embed", "", joined, true, ""});
        return vectors;
    } catch (const std::exception& e) {
        log_->append({"embed", "", joined, false, e.what()});
        throw;
    }
}

std::vector<double> ModelGateway::rerank(const std::string& query, const std::vector<std::string>& passages) {
    if (!reranker_) throw GatewayError(ErrorKind::rejected, "no reranker configured");
    if (passages.empty()) return {};
    try {
        auto scores = reranker_->rerank(query, passages);
        if (scores.size() != passages.size()) {
            throw GatewayError(ErrorKind::malformed, "reranker returned " + std::to_string(scores.size()) +
                                                         " scores for " + std::to_string(passages.size()) + " passages");
        }
        for (double s : scores) {
            if (!std::isfinite(s)) throw GatewayError(ErrorKind::malformed, "reranker returned a non-finite score");
        }
        log_->append({"rerank", "", query, true, ""});
        return scores;
    } catch (const std::exception& e) {
        log_->append({"rerank", "", query, false, e.what()});
        throw;
    }
}

// ============================================================================
// Structured responses
// ============================================================================

std::optional<json> extract_json_object(std::string_view text) {
    for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (c == '\\') ++i;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            else if (c == '{') ++depth;
            else if (c == '}' && --depth == 0) {
                auto parsed = json::parse(text.substr(start, i - start + 1), nullptr, false);
                if (!parsed.is_discarded() && parsed.is_object()) return parsed;
                break;
            }
        }
    }
    return std::nullopt;
}

namespace {

int checked_score(long long v, std::string_view response) {
    if (v < 0 || v > 5) throw ParseError("judge score out of range 0-5 in: " + std::string(response));
    return static_cast<int>(v);
}

// Strict integer parse of the whole (trimmed) string.
std::optional<long long> parse_integer(std::string_view s) {
    s = trim(s);
    if (s.empty() || s.size() > 18) return std::nullopt;
    std::size_t i = s[0] == '-' ? 1 : 0;
    if (i == s.size()) return std::nullopt;
    long long v = 0;
    for (; i < s.size(); ++i) {
        if (!is_digit(s[i])) return std::nullopt;
        v = v * 10 + (s[i] - '0');
    }
    return s[0] == '-' ? -v : v;
}

}  // namespace

int parse_judge_score(std::string_view response) {
    if (auto obj = extract_json_object(response)) {
        auto it = obj->find("score");
        if (it == obj->end()) throw ParseError("judge response has no score field: " + std::string(response));
        if (it->is_number_integer()) return checked_score(it->get<long long>(), response);
        if (it->is_number_float()) {
            const double d = it->get<double>();
            if (d == std::floor(d)) return checked_score(static_cast<long long>(d), response);
        }
        if (it->is_string()) {
            if (auto v = parse_integer(it->get<std::string>())) return checked_score(*v, response);
        }
        throw ParseError("judge score is not an integer: " + std::string(response));
    }
    if (auto v = parse_integer(response)) return checked_score(*v, response);
    // "score: n" / "Score = n"
    const std::string lower = to_lower_ascii(response);
    const auto pos = lower.find("score");
    if (pos != std::string::npos) {
        std::string_view rest = std::string_view(lower).substr(pos + 5);
        rest = trim(rest);
        if (!rest.empty() && (rest[0] == ':' || rest[0] == '=')) {
            rest = trim(rest.substr(1));
            std::size_t n = 0;
            while (n < rest.size() && (is_digit(rest[n]) || (n == 0 && rest[n] == '-'))) ++n;
            const auto tail = trim(rest.substr(n));
            if (n > 0 && (tail.empty() || tail[0] == '.' || tail[0] == ',' || tail[0] == '\n' || tail[0] == '/')) {
                if (auto v = parse_integer(rest.substr(0, n))) return checked_score(*v, response);
            }
        }
    }
    throw ParseError("unparsable judge response: " + std::string(response));
}

std::string_view to_string(PairwiseVerdict v) {
    switch (v) {
        case PairwiseVerdict::a: return "A";
        case PairwiseVerdict::b: return "B";
        case PairwiseVerdict::tie: return "tie";
    }
    return "tie";
}

PairwiseVerdict parse_pairwise_verdict(std::string_view response) {
    std::string token;
    if (auto obj = extract_json_object(response)) {
        auto it = obj->find("winner");
        if (it == obj->end() || !it->is_string()) throw ParseError("pairwise response has no winner: " + std::string(response));
        token = it->get<std::string>();
    } else {
        token = std::string(response);
    }
    const std::string t = to_lower_ascii(trim(token));
    if (t == "a") return PairwiseVerdict::a;
    if (t == "b") return PairwiseVerdict::b;
    if (t == "tie") return PairwiseVerdict::tie;
    throw ParseError("unparsable pairwise verdict: " + std::string(response));
}

Judge::Judge(std::string name, std::shared_ptr<TextGenerator> generator, PromptAssets prompts)
    : name_(std::move(name)), generator_(std::move(generator)), prompts_(std::move(prompts)) {}

int Judge::score(const std::string& question, const std::string& answer, const std::string& reference,
                 const std::optional<std::string>& context) {
    std::map<std::string, std::string> vars{{"question", question},
                                            {"output", answer},
                                            {"reference", reference},
                                            {"format_instructions", prompts_.get("format_instructions")}};
    std::string task = "judge";
    if (context) {
        task = "judge_context";
        vars["context"] = *context;
    }
    GenerateParams params;
    params.task = task;
    params.vars = vars;
    return parse_judge_score(generator_->generate(prompts_.render(task, vars), params));
}

PairwiseVerdict Judge::compare(const std::string& question, const std::string& reference, const std::string& answer_a,
                               const std::string& answer_b) {
    std::map<std::string, std::string> vars{
        {"question", question}, {"reference", reference}, {"answer_a", answer_a}, {"answer_b", answer_b}};
    GenerateParams params;
    params.task = "pairwise_judge";
    params.vars = vars;
    return parse_pairwise_verdict(generator_->generate(prompts_.render("pairwise_judge", vars), params));
}

// ============================================================================
// GatewayConfig
// ============================================================================

namespace {

Endpoint endpoint_from_json(const json& j, const std::string& role) {
    if (!j.is_object()) throw std::invalid_argument("gateway." + role + " must be an object");
    Endpoint e;
    for (const auto& [key, value] : j.items()) {
        if (key == "url") e.url = value.get<std::string>();
        else if (key == "model") e.model = value.get<std::string>();
        else throw std::invalid_argument("unknown key gateway." + role + "." + key);
    }
    return e;
}

}  // namespace

void GatewayConfig::validate() const {
    if (timeout_ms == 0) throw std::invalid_argument("gateway.timeout_ms must be positive");
    if (backoff_factor < 1.0) throw std::invalid_argument("gateway.backoff_factor must be at least 1");
    if (embed_dim == 0) throw std::invalid_argument("gateway.embed_dim must be positive");
    for (const auto* e : {&generate, &embed, &rerank}) {
        if (e->url.empty()) throw std::invalid_argument("gateway endpoint url must not be empty");
    }
}

GatewayConfig GatewayConfig::from_json(const json& j) {
    GatewayConfig c;
    if (!j.is_object()) throw std::invalid_argument("gateway section must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "generate") c.generate = endpoint_from_json(value, key);
        else if (key == "embed") c.embed = endpoint_from_json(value, key);
        else if (key == "rerank") c.rerank = endpoint_from_json(value, key);
        else if (key == "embed_dim") c.embed_dim = value.get<std::size_t>();
        else if (key == "timeout_ms") c.timeout_ms = value.get<std::size_t>();
        else if (key == "retry") c.retry = value.get<std::size_t>();
        else if (key == "backoff_ms") c.backoff_ms = value.get<std::size_t>();
        else if (key == "backoff_factor") c.backoff_factor = value.get<double>();
        else if (key == "api_key") c.api_key = value.get<std::string>();
        else if (key == "prompt_dir") c.prompt_dir = value.get<std::string>();
        else throw std::invalid_argument("unknown key gateway." + key);
    }
    c.validate();
    return c;
}

json GatewayConfig::to_json() const {
    auto ep = [](const Endpoint& e) { return json{{"url", e.url}, {"model", e.model}}; };
    json j{{"generate", ep(generate)},
           {"embed", ep(embed)},
           {"rerank", ep(rerank)},
           {"embed_dim", embed_dim},
           {"timeout_ms", timeout_ms},
           {"retry", retry},
           {"backoff_ms", backoff_ms},
           {"backoff_factor", backoff_factor}};
    if (!prompt_dir.empty()) j["prompt_dir"] = prompt_dir;
    return j;
}

void GatewayConfig::apply_env() {
    auto env = [](const char* name) -> const char* {
        const char* v = std::getenv(name);
        return v && *v ? v : nullptr;
    };
    if (const char* v = env("RAGKIT_GENERATE_URL")) generate.url = v;
    if (const char* v = env("RAGKIT_EMBED_URL")) embed.url = v;
    if (const char* v = env("RAGKIT_RERANK_URL")) rerank.url = v;
    if (const char* v = env("RAGKIT_API_KEY")) api_key = v;
}

}  // namespace ragkit::gateway
