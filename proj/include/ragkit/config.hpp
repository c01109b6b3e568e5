#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ragkit/chunker.hpp"
#include "ragkit/conversation.hpp"
#include "ragkit/corpus.hpp"
#include "ragkit/gateway.hpp"
#include "ragkit/retrieval.hpp"

namespace ragkit::config {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& path, const std::string& key, const std::string& message)
        : std::runtime_error(path + ": " + (key.empty() ? "" : key + ": ") + message), path_(path), key_(key) {}
    const std::string& path() const { return path_; }
    const std::string& key() const { return key_; }

private:
    std::string path_;
    std::string key_;
};

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t max_sessions = 1024;
    bool hallucination_check = true;
    std::size_t threads = 8;

    static ServiceOptions from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct AppConfig {
    gateway::GatewayConfig gateway;
    retrieval::RetrievalConfig retrieval;
    chunking::ChunkConfig chunk;
    corpus::CleaningConfig cleaning;
    conversation::TokenBudget budget;
    std::map<std::string, std::filesystem::path> kbs;  // kb_id -> .idx file
    std::string log_level = "info";
    ServiceOptions service;

    // Relative kb paths resolve against base_dir; every kb path must exist.
    static AppConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    nlohmann::json to_json() const;
};

// Reads the file, applies RAGKIT_* environment overrides and validates.
// Errors are ConfigError carrying the file path and offending key.
AppConfig load_config(const std::filesystem::path& path);

// Defaults with environment overrides; used when no file is given.
AppConfig default_config();

}  // namespace ragkit::config
