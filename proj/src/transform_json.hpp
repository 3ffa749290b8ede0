#pragma once

#include <string>

#include "json_io.hpp"
#include "mmv/transforms.hpp"

namespace mmv {

Json transform_to_json(const TransformStep& step);
/// Strict: unknown keys raise UnknownKey, bad values ValidationError. `where`
/// prefixes diagnostics (e.g. "preprocess[1]").
TransformStep transform_from_json(const Json& j, const std::string& where);

/// Throws UnknownKey naming the nearest allowed key when `j` has extras.
void reject_unknown_keys(const Json& j, const std::vector<std::string>& allowed, const std::string& where);

}  // namespace mmv
