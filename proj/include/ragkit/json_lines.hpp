#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ragkit {

using json = nlohmann::json;

// Calls `fn(object, line_number)` for every non-blank line. Parse errors are
// rethrown as std::runtime_error carrying "path:line".
void for_each_json_line(const std::filesystem::path& path,
                        const std::function<void(const json&, std::size_t)>& fn);

std::vector<json> read_json_lines(const std::filesystem::path& path);
void write_json_lines(const std::filesystem::path& path, const std::vector<json>& rows);

json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& value);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace ragkit
