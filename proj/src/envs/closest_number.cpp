#include <algorithm>
#include <map>

#include "codegym/env_library.hpp"
#include "envs/env_util.hpp"

namespace codegym::envs {

namespace {

using codegym::Json;

struct ClosestNumberState {
  std::vector<std::int64_t> array;  // hidden
  std::int64_t k = 0;
};

void to_json(Json& j, const ClosestNumberState& s) { j = Json{{"array", s.array}, {"k", s.k}}; }
void from_json(const Json& j, ClosestNumberState& s) {
  j.at("array").get_to(s.array);
  j.at("k").get_to(s.k);
}

std::string observe(ClosestNumberState& s, const Json&) {
  return "The sorted array has length N=" + std::to_string(s.array.size()) +
         " and the target is K=" + std::to_string(s.k) + ".";
}

std::string look_up_pos(ClosestNumberState& s, const Json& params) {
  const auto index = detail::int_param(params, "index");
  const auto n = static_cast<std::int64_t>(s.array.size());
  if (index < 0 || index >= n) {
    throw core::ToolError("index " + std::to_string(index) + " is out of range [0, " +
                          std::to_string(n) + ")");
  }
  return "element at index " + std::to_string(index) + " is " +
         std::to_string(s.array[static_cast<std::size_t>(index)]);
}

class ClosestNumberEnv final : public core::TypedEnvironment<ClosestNumberState> {
 public:
  ClosestNumberEnv() {
    add_tool({"Observe", {}, "Get the length N of the hidden sorted array and the target K.",
              "The array length N and the target K."},
             observe);
    add_tool({"LookUpPos",
              {{"index", core::ValueType::Int, "Zero-based position in the sorted array."}},
              "Read the element stored at the given position of the sorted array.",
              "The element at that position."},
             look_up_pos);
    add_done_tool(core::ValueType::Int, "The array element closest to K.");
  }

  std::string_view name() const override { return "ClosestNumberEnv"; }

  std::span<const core::ParamSpec> config_schema() const override { return schema_; }

  std::string task_description() const override {
    return "A sorted list of N integers is hidden from you; only its length N and a target "
           "K are visible. Find the element of the list whose value is closest to K. When two "
           "elements are equally close, the smaller one is the answer. Example: for the list "
           "[1, 3, 5, 8] and K = 6 the answer is 5.";
  }

  std::vector<std::string> hidden_fields() const override { return {"array"}; }

  std::unique_ptr<core::EnvState> initial_state(const core::TaskConfig& config) const override {
    return box({detail::int_list(config.at("array")), config.at("k").get<std::int64_t>()});
  }

  Json reference_answer(const core::TaskConfig& config) const override {
    const auto array = detail::int_list(config.at("array"));
    return closest_number_ref(array, config.at("k").get<std::int64_t>());
  }

  // Lower-bound binary search. Probed values are cached; the two neighbors
  // of the insertion point are always among them, so the answer needs no
  // extra lookups.
  void solve(core::ToolApi& api) const override {
    const auto info = detail::expect_live(api.call("Observe")).observation;
    const auto k = detail::trailing_int(info);
    const auto n_pos = info.find("N=");
    const auto n = std::stoll(info.substr(n_pos + 2));

    std::map<std::int64_t, std::int64_t> seen;
    auto value_at = [&](std::int64_t i) {
      auto it = seen.find(i);
      if (it != seen.end()) return it->second;
      const auto obs = detail::expect_live(api.call("LookUpPos", Json{{"index", i}})).observation;
      return seen[i] = detail::trailing_int(obs);
    };

    std::int64_t lo = 0;
    std::int64_t hi = n;
    while (lo < hi) {
      const auto mid = lo + (hi - lo) / 2;
      if (value_at(mid) < k) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    std::int64_t best = 0;
    if (lo == 0) {
      best = value_at(0);
    } else if (lo == n) {
      best = value_at(n - 1);
    } else {
      const auto below = value_at(lo - 1);
      const auto above = value_at(lo);
      best = (k - below <= above - k) ? below : above;
    }
    api.call("Done", Json{{"answer", best}});
  }

  core::TaskConfig generate_config(core::Tier tier, std::uint64_t seed) const override {
    const auto bounds = tier_bounds(name(), tier);
    Rng rng(seed);
    const int n = static_cast<int>(rng.uniform(bounds.min_size, bounds.max_size));
    auto array = detail::random_ints(rng, n, bounds.min_value, bounds.max_value);
    std::sort(array.begin(), array.end());
    const auto span = bounds.max_value - bounds.min_value;
    std::int64_t k = rng.uniform(bounds.min_value - span / 10, bounds.max_value + span / 10);
    const auto shape = rng.uniform(0, 3);
    if (shape == 0 && n >= 2) {
      // Tie candidate: halfway between two neighbors when the gap is even.
      const auto i = static_cast<std::size_t>(rng.uniform(1, n - 1));
      if ((array[i] - array[i - 1]) % 2 == 0) k = array[i - 1] + (array[i] - array[i - 1]) / 2;
    } else if (shape == 1 && tier == core::Tier::Hard) {
      k = rng.bernoulli(0.5) ? bounds.min_value - span : bounds.max_value + span;
    } else if (shape == 2) {
      k = array[static_cast<std::size_t>(rng.uniform(0, n - 1))];
    }
    return core::TaskConfig(Json{{"array", array}, {"k", k}});
  }

 protected:
  void check_semantics(const core::TaskConfig& config) const override {
    const auto array = detail::int_list(config.at("array"));
    if (array.empty()) {
      throw Error(ErrorCode::ConfigSchemaViolation, "ClosestNumberEnv array must be non-empty");
    }
    if (!std::is_sorted(array.begin(), array.end())) {
      throw Error(ErrorCode::ConfigSchemaViolation, "ClosestNumberEnv array must be sorted");
    }
  }

 private:
  std::vector<core::ParamSpec> schema_{
      {"array", core::ValueType::IntList, "sorted integers"},
      {"k", core::ValueType::Int, "target value"},
  };
};

}  // namespace

std::int64_t closest_number_ref(std::span<const std::int64_t> sorted, std::int64_t k) {
  if (sorted.empty()) throw Error(ErrorCode::EmptyInput, "closest_number_ref: empty array");
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), k);
  if (it == sorted.begin()) return *it;
  if (it == sorted.end()) return sorted.back();
  const auto below = *(it - 1);
  return (k - below <= *it - k) ? below : *it;
}

std::shared_ptr<const core::Environment> make_closest_number_env() {
  return std::make_shared<ClosestNumberEnv>();
}

}  // namespace codegym::envs
