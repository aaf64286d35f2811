#pragma once

#include <string>

#include <json.hpp>

namespace codegym {

using Json = nlohmann::json;

// Python-compatible canonical form: sorted keys, ", " and ": " separators,
// non-ASCII escaped. Manifests written with it are stable and diffable.
std::string canonical_dump(const Json& value);
void canonical_dump(const Json& value, std::string& out);

// Accepts comments in addition to strict JSON. Throws Json::parse_error.
Json parse_lenient(std::string_view text);

}  // namespace codegym
