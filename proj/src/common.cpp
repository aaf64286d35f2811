#include "codegym/error.hpp"
#include "codegym/json.hpp"
#include "codegym/rng.hpp"

namespace codegym {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedEnvString: return "MalformedEnvString";
    case ErrorCode::UnknownEnvironment: return "UnknownEnvironment";
    case ErrorCode::ConfigSchemaViolation: return "ConfigSchemaViolation";
    case ErrorCode::EpisodeFinished: return "EpisodeFinished";
    case ErrorCode::NonSerializableConfig: return "NonSerializableConfig";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorCode::OracleFailed: return "OracleFailed";
    case ErrorCode::SerializationFailure: return "SerializationFailure";
    case ErrorCode::ManifestParseError: return "ManifestParseError";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ConnectionFailure: return "ConnectionFailure";
    case ErrorCode::ServerError: return "ServerError";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

void canonical_dump(const Json& value, std::string& out) {
  if (value.is_object()) {
    out += '{';
    bool first = true;
    for (const auto& [key, item] : value.items()) {
      if (!first) out += ", ";
      first = false;
      out += Json(key).dump(-1, ' ', true);
      out += ": ";
      canonical_dump(item, out);
    }
    out += '}';
  } else if (value.is_array()) {
    out += '[';
    bool first = true;
    for (const auto& item : value) {
      if (!first) out += ", ";
      first = false;
      canonical_dump(item, out);
    }
    out += ']';
  } else {
    out += value.dump(-1, ' ', true);
  }
}

std::string canonical_dump(const Json& value) {
  std::string out;
  canonical_dump(value, out);
  return out;
}

Json parse_lenient(std::string_view text) {
  return Json::parse(text.begin(), text.end(), nullptr, true, true);
}

std::int64_t Rng::uniform(std::int64_t lo, std::int64_t hi) {
  if (hi <= lo) return lo;
  const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo);
  if (span == ~std::uint64_t{0}) return static_cast<std::int64_t>(next());
  const std::uint64_t range = span + 1;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % range);
  std::uint64_t draw = next();
  while (draw >= limit) draw = next();
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(lo) + draw % range);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index) {
  // FNV-1a over the label, mixed with the parent seed and index.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  Rng mix(seed ^ h ^ (index * 0xd6e8feb86659fd93ULL));
  mix.next();
  return mix.next();
}

}  // namespace codegym
