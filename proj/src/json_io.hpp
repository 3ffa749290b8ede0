#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace mmv {

using Json = nlohmann::json;

/// Sorted keys (std::map backed), two-space indent, UTF-8, trailing LF.
inline std::string dump_json(const Json& j) { return j.dump(2, ' ', false) + "\n"; }

std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temporary file then renames over `path`.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace mmv

namespace mmv {

/// Closest candidate by edit distance, for "did you mean" diagnostics.
std::string nearest_key(const std::string& key, const std::vector<std::string>& candidates);

}  // namespace mmv
