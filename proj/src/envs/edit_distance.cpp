#include <algorithm>
#include <optional>

#include "codegym/env_library.hpp"
#include "envs/env_util.hpp"

namespace codegym::envs {

namespace {

using codegym::Json;

constexpr std::string_view kSmallAlphabet = "abcd";
constexpr std::string_view kLargeAlphabet =
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

// dp cells are null until written.
struct EditDistanceState {
  std::string s1;  // hidden
  std::string s2;  // hidden
  std::vector<std::vector<std::optional<std::int64_t>>> dp;
};

void to_json(Json& j, const EditDistanceState& s) {
  Json table = Json::array();
  for (const auto& row : s.dp) {
    Json cells = Json::array();
    for (const auto& cell : row) cells.push_back(cell ? Json(*cell) : Json(nullptr));
    table.push_back(std::move(cells));
  }
  j = Json{{"s1", s.s1}, {"s2", s.s2}, {"dp", std::move(table)}};
}

void from_json(const Json& j, EditDistanceState& s) {
  j.at("s1").get_to(s.s1);
  j.at("s2").get_to(s.s2);
  s.dp.clear();
  for (const auto& row : j.at("dp")) {
    auto& cells = s.dp.emplace_back();
    for (const auto& cell : row) {
      cells.push_back(cell.is_null() ? std::nullopt
                                     : std::optional<std::int64_t>(cell.get<std::int64_t>()));
    }
  }
}

std::size_t filled(const EditDistanceState& s) {
  std::size_t count = 0;
  for (const auto& row : s.dp) {
    count += static_cast<std::size_t>(std::count_if(row.begin(), row.end(),
                                                    [](const auto& c) { return c.has_value(); }));
  }
  return count;
}

std::pair<std::size_t, std::size_t> cell_index(const EditDistanceState& s, const Json& params) {
  const auto i = detail::int_param(params, "i");
  const auto j = detail::int_param(params, "j");
  const auto rows = static_cast<std::int64_t>(s.dp.size());
  const auto cols = static_cast<std::int64_t>(s.dp.front().size());
  if (i < 0 || i >= rows || j < 0 || j >= cols) {
    throw core::ToolError("cell (" + std::to_string(i) + ", " + std::to_string(j) +
                          ") is outside the " + std::to_string(rows) + " x " +
                          std::to_string(cols) + " table");
  }
  return {static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
}

std::string cell_text(std::size_t i, std::size_t j, std::int64_t value) {
  return "dp[" + std::to_string(i) + "][" + std::to_string(j) + "] = " + std::to_string(value);
}

std::string observe(EditDistanceState& s, const Json&) {
  return "s1 length: " + std::to_string(s.s1.size()) + ", s2 length: " +
         std::to_string(s.s2.size()) + ", DP table: " + std::to_string(s.dp.size()) + " x " +
         std::to_string(s.dp.front().size()) + ", filled cells: " + std::to_string(filled(s));
}

std::string get_string_length(EditDistanceState& s, const Json& params) {
  const auto which = detail::int_param(params, "which");
  if (which != 1 && which != 2) throw core::ToolError("which must be 1 or 2");
  return std::to_string(which == 1 ? s.s1.size() : s.s2.size());
}

std::string compare_characters(EditDistanceState& s, const Json& params) {
  const auto i = detail::int_param(params, "i");
  const auto j = detail::int_param(params, "j");
  if (i < 0 || i >= static_cast<std::int64_t>(s.s1.size())) {
    throw core::ToolError("i " + std::to_string(i) + " is out of range for s1");
  }
  if (j < 0 || j >= static_cast<std::int64_t>(s.s2.size())) {
    throw core::ToolError("j " + std::to_string(j) + " is out of range for s2");
  }
  const bool same = s.s1[static_cast<std::size_t>(i)] == s.s2[static_cast<std::size_t>(j)];
  return "s1[" + std::to_string(i) + "] and s2[" + std::to_string(j) + "] are " +
         (same ? "the same" : "different");
}

std::string set_dp_table_cell(EditDistanceState& s, const Json& params) {
  const auto [i, j] = cell_index(s, params);
  const auto value = detail::int_param(params, "value");
  s.dp[i][j] = value;
  return cell_text(i, j, value);
}

std::string get_dp_table_cell(EditDistanceState& s, const Json& params) {
  const auto [i, j] = cell_index(s, params);
  if (!s.dp[i][j]) {
    throw core::ToolError("dp[" + std::to_string(i) + "][" + std::to_string(j) +
                          "] has not been set");
  }
  return cell_text(i, j, *s.dp[i][j]);
}

class EditDistanceEnv final : public core::TypedEnvironment<EditDistanceState> {
 public:
  EditDistanceEnv() {
    const core::ParamSpec row{"i", core::ValueType::Int, "Row index (prefix length of s1)."};
    const core::ParamSpec col{"j", core::ValueType::Int, "Column index (prefix length of s2)."};
    add_tool({"Observe", {}, "Get both string lengths and the DP table fill status.",
              "The lengths, the table dimensions and the number of filled cells."},
             observe);
    add_tool({"GetStringLength", {{"which", core::ValueType::Int, "1 for s1, 2 for s2."}},
              "Get the length of one of the two strings.", "The length as an integer."},
             get_string_length);
    add_tool({"CompareCharacters",
              {{"i", core::ValueType::Int, "Zero-based position in s1."},
               {"j", core::ValueType::Int, "Zero-based position in s2."}},
              "Check whether s1[i] and s2[j] are the same character.",
              "Whether the two characters are the same or different."},
             compare_characters);
    add_tool({"SetDPTableCell", {row, col, {"value", core::ValueType::Int, "Value to store."}},
              "Store a value in the DP table cell (i, j).", "The stored cell."},
             set_dp_table_cell);
    add_tool({"GetDPTableCell", {row, col}, "Read the DP table cell (i, j); it must be set.",
              "The cell value."},
             get_dp_table_cell);
    add_done_tool(core::ValueType::Int, "The edit distance between s1 and s2.");
  }

  std::string_view name() const override { return "EditDistanceEnv"; }

  std::span<const core::ParamSpec> config_schema() const override { return schema_; }

  std::string task_description() const override {
    return "Two strings s1 and s2 are hidden; their lengths are visible and their characters "
           "can be compared pairwise. Compute the edit distance between them: the minimum "
           "number of single-character insertions, deletions and substitutions that turn s1 "
           "into s2. A DP table of size (len(s1)+1) x (len(s2)+1) is provided for intermediate "
           "values. Example: the edit distance between \"kitten\" and \"sitting\" is 3.";
  }

  std::vector<std::string> hidden_fields() const override { return {"s1", "s2"}; }

  std::unique_ptr<core::EnvState> initial_state(const core::TaskConfig& config) const override {
    EditDistanceState s;
    s.s1 = config.at("s1").get<std::string>();
    s.s2 = config.at("s2").get<std::string>();
    s.dp.assign(s.s1.size() + 1, std::vector<std::optional<std::int64_t>>(s.s2.size() + 1));
    return box(std::move(s));
  }

  Json reference_answer(const core::TaskConfig& config) const override {
    return edit_distance_ref(config.at("s1").get<std::string>(),
                             config.at("s2").get<std::string>());
  }

  // Row-major fill. Values already written are mirrored locally; the final
  // cell is read back from the table before submitting.
  void solve(core::ToolApi& api) const override {
    const auto info = detail::expect_live(api.call("Observe")).observation;
    const auto len1 = std::stoll(info.substr(info.find("s1 length: ") + 11));
    const auto len2 = std::stoll(info.substr(info.find("s2 length: ") + 11));

    std::vector<std::vector<std::int64_t>> dp(static_cast<std::size_t>(len1 + 1),
                                              std::vector<std::int64_t>(static_cast<std::size_t>(len2 + 1)));
    for (std::int64_t i = 0; i <= len1; ++i) {
      for (std::int64_t j = 0; j <= len2; ++j) {
        std::int64_t value = 0;
        if (i == 0) {
          value = j;
        } else if (j == 0) {
          value = i;
        } else {
          const auto cmp = detail::expect_live(api.call("CompareCharacters",
                                                        Json{{"i", i - 1}, {"j", j - 1}}))
                               .observation;
          const std::int64_t cost = cmp.ends_with("the same") ? 0 : 1;
          const auto ui = static_cast<std::size_t>(i);
          const auto uj = static_cast<std::size_t>(j);
          value = std::min({dp[ui - 1][uj] + 1, dp[ui][uj - 1] + 1, dp[ui - 1][uj - 1] + cost});
        }
        dp[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = value;
        detail::expect_live(
            api.call("SetDPTableCell", Json{{"i", i}, {"j", j}, {"value", value}}));
      }
    }
    const auto last = detail::expect_live(api.call("GetDPTableCell", Json{{"i", len1}, {"j", len2}}));
    api.call("Done", Json{{"answer", detail::trailing_int(last.observation)}});
  }

  core::TaskConfig generate_config(core::Tier tier, std::uint64_t seed) const override {
    const auto bounds = tier_bounds(name(), tier);
    Rng rng(seed);
    const auto alphabet = tier == core::Tier::Scaled ? kLargeAlphabet : kSmallAlphabet;
    const auto alpha = std::min<std::int64_t>(bounds.max_value,
                                              static_cast<std::int64_t>(alphabet.size()));
    auto random_string = [&](int length) {
      std::string out;
      for (int i = 0; i < length; ++i) {
        out += alphabet[static_cast<std::size_t>(rng.uniform(0, alpha - 1))];
      }
      return out;
    };
    const auto len1 = static_cast<int>(rng.uniform(bounds.min_size, bounds.max_size));
    const auto len2 = static_cast<int>(rng.uniform(bounds.min_size, bounds.max_size));
    std::string s1 = random_string(len1);
    std::string s2 = random_string(len2);
    if (tier == core::Tier::Hard && rng.uniform(0, 3) == 0) {
      s2 = s1;  // identical strings, distance 0
    }
    return core::TaskConfig(Json{{"s1", s1}, {"s2", s2}});
  }

 private:
  std::vector<core::ParamSpec> schema_{
      {"s1", core::ValueType::String, "source string"},
      {"s2", core::ValueType::String, "target string"},
  };
};

}  // namespace

std::int64_t edit_distance_ref(std::string_view s1, std::string_view s2) {
  std::vector<std::int64_t> prev(s2.size() + 1);
  std::vector<std::int64_t> cur(s2.size() + 1);
  for (std::size_t j = 0; j <= s2.size(); ++j) prev[j] = static_cast<std::int64_t>(j);
  for (std::size_t i = 1; i <= s1.size(); ++i) {
    cur[0] = static_cast<std::int64_t>(i);
    for (std::size_t j = 1; j <= s2.size(); ++j) {
      const std::int64_t cost = s1[i - 1] == s2[j - 1] ? 0 : 1;
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
    }
    std::swap(prev, cur);
  }
  return prev[s2.size()];
}

std::shared_ptr<const core::Environment> make_edit_distance_env() {
  return std::make_shared<EditDistanceEnv>();
}

}  // namespace codegym::envs
