#include "ragkit/config.hpp"

#include <fstream>
#include <set>

namespace ragkit::config {

using nlohmann::json;

namespace {

constexpr const char* kInline = "<config>";

template <class Fn>
auto section(const std::string& key, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(kInline, key, e.what());
    }
}

}  // namespace

ServiceOptions ServiceOptions::from_json(const json& j) {
    ServiceOptions o;
    if (!j.is_object()) throw std::invalid_argument("must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "host") o.host = value.get<std::string>();
        else if (key == "port") o.port = value.get<int>();
        else if (key == "max_sessions") o.max_sessions = value.get<std::size_t>();
        else if (key == "hallucination_check") o.hallucination_check = value.get<bool>();
        else if (key == "threads") o.threads = value.get<std::size_t>();
        else throw std::invalid_argument("unknown key service." + key);
    }
    if (o.port < 0 || o.port > 65535) throw std::invalid_argument("service.port out of range");
    if (o.max_sessions == 0) throw std::invalid_argument("service.max_sessions must be positive");
    if (o.threads == 0) throw std::invalid_argument("service.threads must be positive");
    return o;
}

json ServiceOptions::to_json() const {
    return {{"host", host},
            {"port", port},
            {"max_sessions", max_sessions},
            {"hallucination_check", hallucination_check},
            {"threads", threads}};
}

AppConfig AppConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError(kInline, "", "top level must be a JSON object");
    AppConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "v") {
            if (!value.is_number_integer() || value.get<int>() != 1) throw ConfigError(kInline, key, "unsupported version");
        } else if (key == "gateway") {
            c.gateway = section(key, [&] { return gateway::GatewayConfig::from_json(value); });
        } else if (key == "retrieval") {
            c.retrieval = section(key, [&] { return retrieval::RetrievalConfig::from_json(value); });
        } else if (key == "chunk") {
            c.chunk = section(key, [&] { return chunking::ChunkConfig::from_json(value); });
        } else if (key == "cleaning") {
            c.cleaning = section(key, [&] { return corpus::CleaningConfig::from_json(value); });
        } else if (key == "budget") {
            c.budget = section(key, [&] { return conversation::TokenBudget::from_json(value); });
        } else if (key == "service") {
            c.service = section(key, [&] { return ServiceOptions::from_json(value); });
        } else if (key == "log_level") {
            c.log_level = section(key, [&] { return value.get<std::string>(); });
            static const std::set<std::string> levels{"trace", "debug", "info", "warn", "error", "off"};
            if (!levels.count(c.log_level)) throw ConfigError(kInline, key, "unknown level '" + c.log_level + "'");
        } else if (key == "kbs") {
            if (!value.is_object()) throw ConfigError(kInline, key, "must map kb ids to index files");
            for (const auto& [kb, path] : value.items()) {
                if (!path.is_string()) throw ConfigError(kInline, "kbs." + kb, "must be a path string");
                std::filesystem::path p = path.get<std::string>();
                if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
                if (!std::filesystem::exists(p)) throw ConfigError(kInline, "kbs." + kb, "index file " + p.string() + " not found");
                c.kbs[kb] = p;
            }
        } else {
            throw ConfigError(kInline, key, "unknown key");
        }
    }
    return c;
}

json AppConfig::to_json() const {
    json kb = json::object();
    for (const auto& [id, path] : kbs) kb[id] = path.string();
    return {{"v", 1},
            {"gateway", gateway.to_json()},
            {"retrieval", retrieval.to_json()},
            {"chunk", chunk.to_json()},
            {"cleaning", cleaning.to_json()},
            {"budget", budget.to_json()},
            {"service", service.to_json()},
            {"kbs", kb},
            {"log_level", log_level}};
}

AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), "", "cannot open config file");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError(path.string(), "", "not valid JSON");
    try {
        AppConfig c = AppConfig::from_json(j, path.parent_path());
        c.gateway.apply_env();
        c.gateway.validate();
        return c;
    } catch (const ConfigError& e) {
        std::string msg = e.what();
        const std::string prefix = std::string(kInline) + ": ";
        if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
        if (!e.key().empty() && msg.rfind(e.key() + ": ", 0) == 0) msg = msg.substr(e.key().size() + 2);
        throw ConfigError(path.string(), e.key(), msg);
    } catch (const std::exception& e) {
        throw ConfigError(path.string(), "gateway", e.what());
    }
}

AppConfig default_config() {
    AppConfig c;
    c.gateway.apply_env();
    c.gateway.validate();
    return c;
}

}  // namespace ragkit::config
