#include "envs/env_util.hpp"

#include <cctype>

namespace codegym::envs::detail {

std::int64_t trailing_int(std::string_view observation) {
  std::size_t end = observation.size();
  while (end > 0 && !std::isdigit(static_cast<unsigned char>(observation[end - 1]))) --end;
  if (end == 0) {
    throw Error(ErrorCode::OracleFailed,
                "no integer in observation '" + std::string(observation) + "'");
  }
  std::size_t begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(observation[begin - 1]))) --begin;
  const bool negative = begin > 0 && observation[begin - 1] == '-';
  std::int64_t value = std::stoll(std::string(observation.substr(begin, end - begin)));
  return negative ? -value : value;
}

Json json_after(std::string_view observation, std::string_view marker) {
  const auto pos = observation.find(marker);
  if (pos == std::string_view::npos) {
    throw Error(ErrorCode::OracleFailed, "observation lacks '" + std::string(marker) + "'");
  }
  auto rest = observation.substr(pos + marker.size());
  while (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  // Only bracketed values are expected here; the value may be followed by text.
  std::size_t cut = std::string_view::npos;
  if (!rest.empty() && (rest.front() == '[' || rest.front() == '{')) {
    const char open = rest.front();
    const char close = open == '[' ? ']' : '}';
    int depth = 0;
    for (std::size_t i = 0; i < rest.size(); ++i) {
      if (rest[i] == open) ++depth;
      if (rest[i] == close && --depth == 0) {
        cut = i + 1;
        break;
      }
    }
  }
  Json out = cut == std::string_view::npos
                       ? Json(Json::value_t::discarded)
                       : Json::parse(rest.substr(0, cut), nullptr, false);
  if (out.is_discarded()) {
    throw Error(ErrorCode::OracleFailed, "unparseable value after '" + std::string(marker) + "'");
  }
  return out;
}

std::string render_list(const std::vector<std::int64_t>& values) {
  return canonical_dump(Json(values));
}

std::vector<std::int64_t> int_list(const Json& value) {
  return value.get<std::vector<std::int64_t>>();
}

std::int64_t int_param(const Json& params, const char* key) {
  return params.at(key).get<std::int64_t>();
}

core::StepResult expect_live(core::StepResult result) {
  if (result.finished) {
    throw Error(ErrorCode::OracleFailed, "episode ended early: " + result.observation);
  }
  return result;
}

std::vector<std::int64_t> random_ints(Rng& rng, int size, std::int64_t lo, std::int64_t hi) {
  std::vector<std::int64_t> out(static_cast<std::size_t>(size));
  for (auto& v : out) v = rng.uniform(lo, hi);
  return out;
}

}  // namespace codegym::envs::detail
