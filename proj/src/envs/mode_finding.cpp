#include <algorithm>
#include <array>

#include "codegym/env_library.hpp"
#include "envs/env_util.hpp"

namespace codegym::envs {

namespace {

using codegym::Json;

struct ModeFindingState {
  std::vector<std::int64_t> scores;  // hidden
};

void to_json(Json& j, const ModeFindingState& s) { j = Json{{"scores", s.scores}}; }
void from_json(const Json& j, ModeFindingState& s) { j.at("scores").get_to(s.scores); }

std::string observe(ModeFindingState& s, const Json&) {
  return "The score list holds " + std::to_string(s.scores.size()) +
         " scores, each an integer between 0 and " + std::to_string(kMaxScore) + ".";
}

std::string count_occurrences(ModeFindingState& s, const Json& params) {
  const auto number = detail::int_param(params, "number");
  return std::to_string(std::count(s.scores.begin(), s.scores.end(), number));
}

std::string get_max_frequency(ModeFindingState&, const Json& params) {
  const auto freq = detail::int_list(params.at("frequency_list"));
  if (freq.empty()) throw core::ToolError("frequency_list is empty");
  return std::to_string(*std::max_element(freq.begin(), freq.end()));
}

std::string get_modes(ModeFindingState&, const Json& params) {
  const auto freq = detail::int_list(params.at("frequency_list"));
  const auto max_freq = detail::int_param(params, "max_freq");
  std::vector<std::int64_t> modes;
  for (std::size_t i = 0; i < freq.size(); ++i) {
    if (freq[i] == max_freq) modes.push_back(static_cast<std::int64_t>(i));
  }
  return detail::render_list(modes);
}

class ModeFindingEnv final : public core::TypedEnvironment<ModeFindingState> {
 public:
  ModeFindingEnv() {
    add_tool({"Observe", {}, "Get the number of scores and their value range.",
              "The size of the score list and the allowed value range."},
             observe);
    add_tool({"CountOccurrences", {{"number", core::ValueType::Int, "Score value to count."}},
              "Count how many scores equal the given value.", "The count as an integer."},
             count_occurrences);
    add_tool({"GetMaxFrequency",
              {{"frequency_list", core::ValueType::IntList,
                "Frequencies, where position i holds the count of score i."}},
              "Find the largest frequency in a frequency list.", "The maximum frequency."},
             get_max_frequency);
    add_tool({"GetModes",
              {{"frequency_list", core::ValueType::IntList,
                "Frequencies, where position i holds the count of score i."},
               {"max_freq", core::ValueType::Int, "The frequency to select."}},
              "List the score values whose frequency equals max_freq.",
              "A JSON list of score values in ascending order."},
             get_modes);
    add_done_tool(core::ValueType::IntList, "All modes of the score list.");
  }

  std::string_view name() const override { return "ModeFindingEnv"; }

  std::span<const core::ParamSpec> config_schema() const override { return schema_; }

  std::string task_description() const override {
    return "A hidden list of exam scores contains integers from 0 to 10. Find every mode of "
           "the list, that is, every score value that occurs the largest number of times, and "
           "answer them as a list. Example: for the scores [1, 1, 2, 3, 3] the answer is "
           "[1, 3].";
  }

  std::vector<std::string> hidden_fields() const override { return {"scores"}; }

  std::unique_ptr<core::EnvState> initial_state(const core::TaskConfig& config) const override {
    return box({detail::int_list(config.at("scores"))});
  }

  Json reference_answer(const core::TaskConfig& config) const override {
    return mode_finding_ref(detail::int_list(config.at("scores")));
  }

  Json canonical_answer(Json answer) const override {
    if (answer.is_array() && std::all_of(answer.begin(), answer.end(),
                                         [](const Json& v) { return v.is_number(); })) {
      std::sort(answer.begin(), answer.end());
    }
    return answer;
  }

  void solve(core::ToolApi& api) const override {
    detail::expect_live(api.call("Observe"));
    std::vector<std::int64_t> freq;
    for (std::int64_t value = 0; value <= kMaxScore; ++value) {
      const auto obs =
          detail::expect_live(api.call("CountOccurrences", Json{{"number", value}})).observation;
      freq.push_back(detail::trailing_int(obs));
    }
    const auto max_freq = detail::trailing_int(
        detail::expect_live(api.call("GetMaxFrequency", Json{{"frequency_list", freq}}))
            .observation);
    const auto modes =
        detail::expect_live(
            api.call("GetModes", Json{{"frequency_list", freq}, {"max_freq", max_freq}}))
            .observation;
    api.call("Done", Json{{"answer", Json::parse(modes)}});
  }

  core::TaskConfig generate_config(core::Tier tier, std::uint64_t seed) const override {
    const auto bounds = tier_bounds(name(), tier);
    Rng rng(seed);
    const int n = static_cast<int>(rng.uniform(bounds.min_size, bounds.max_size));
    auto scores = detail::random_ints(rng, n, bounds.min_value, bounds.max_value);
    if (tier == core::Tier::Hard || tier == core::Tier::Scaled) {
      switch (rng.uniform(0, 3)) {
        case 0: std::fill(scores.begin(), scores.end(), rng.uniform(0, kMaxScore)); break;
        case 1: {
          // Every value equally frequent: all eleven values are modes.
          constexpr int kValues = kMaxScore + 1;
          int size = n - n % kValues;
          if (size < bounds.min_size) size += kValues;
          scores.resize(static_cast<std::size_t>(size));
          for (std::size_t i = 0; i < scores.size(); ++i) {
            scores[i] = static_cast<std::int64_t>(i % kValues);
          }
          break;
        }
        default: break;
      }
    }
    return core::TaskConfig(Json{{"scores", scores}});
  }

 protected:
  void check_semantics(const core::TaskConfig& config) const override {
    const auto scores = detail::int_list(config.at("scores"));
    if (scores.empty()) {
      throw Error(ErrorCode::ConfigSchemaViolation, "ModeFindingEnv scores must be non-empty");
    }
    if (std::any_of(scores.begin(), scores.end(),
                    [](std::int64_t v) { return v < 0 || v > kMaxScore; })) {
      throw Error(ErrorCode::ConfigSchemaViolation, "ModeFindingEnv scores must lie in [0, 10]");
    }
  }

 private:
  std::vector<core::ParamSpec> schema_{
      {"scores", core::ValueType::IntList, "scores in [0, 10]"},
  };
};

}  // namespace

std::vector<std::int64_t> mode_finding_ref(std::span<const std::int64_t> scores) {
  if (scores.empty()) throw Error(ErrorCode::EmptyInput, "mode_finding_ref: empty input");
  std::array<std::int64_t, kMaxScore + 1> counts{};
  for (const auto v : scores) {
    if (v < 0 || v > kMaxScore) {
      throw Error(ErrorCode::ValueOutOfRange,
                  "mode_finding_ref: score " + std::to_string(v) + " outside [0, 10]");
    }
    ++counts[static_cast<std::size_t>(v)];
  }
  const auto top = *std::max_element(counts.begin(), counts.end());
  std::vector<std::int64_t> modes;
  for (std::size_t v = 0; v < counts.size(); ++v) {
    if (counts[v] == top) modes.push_back(static_cast<std::int64_t>(v));
  }
  return modes;
}

std::shared_ptr<const core::Environment> make_mode_finding_env() {
  return std::make_shared<ModeFindingEnv>();
}

}  // namespace codegym::envs
