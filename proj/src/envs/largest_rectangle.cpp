#include <algorithm>

#include "codegym/env_library.hpp"
#include "envs/env_util.hpp"

namespace codegym::envs {

namespace {

using codegym::Json;

struct LargestRectangleState {
  std::vector<std::int64_t> heights;
  std::int64_t index = 0;
  std::vector<std::int64_t> stack;  // strictly increasing indices
};

void to_json(Json& j, const LargestRectangleState& s) {
  j = Json{{"heights", s.heights}, {"index", s.index}, {"stack", s.stack}};
}
void from_json(const Json& j, LargestRectangleState& s) {
  j.at("heights").get_to(s.heights);
  j.at("index").get_to(s.index);
  j.at("stack").get_to(s.stack);
}

std::int64_t checked_index(const LargestRectangleState& s, const Json& params, const char* key) {
  const auto i = detail::int_param(params, key);
  const auto n = static_cast<std::int64_t>(s.heights.size());
  if (i < 0 || i >= n) {
    throw core::ToolError(std::string(key) + " " + std::to_string(i) + " is out of range [0, " +
                          std::to_string(n) + ")");
  }
  return i;
}

std::string stack_text(const LargestRectangleState& s) { return "stack: " + detail::render_list(s.stack); }

std::string observe(LargestRectangleState& s, const Json&) {
  return "heights: " + detail::render_list(s.heights) +
         ", current index: " + std::to_string(s.index);
}

std::string push_to_stack(LargestRectangleState& s, const Json& params) {
  const auto i = checked_index(s, params, "index");
  if (!s.stack.empty() && i <= s.stack.back()) {
    throw core::ToolError("index " + std::to_string(i) + " must exceed the stack top " +
                          std::to_string(s.stack.back()));
  }
  s.stack.push_back(i);
  s.index = i + 1;
  return "Pushed " + std::to_string(i) + ". " + stack_text(s);
}

std::string pop_from_stack(LargestRectangleState& s, const Json&) {
  if (s.stack.empty()) throw core::ToolError("the stack is empty");
  const auto top = s.stack.back();
  s.stack.pop_back();
  return "Popped " + std::to_string(top) + ". " + stack_text(s);
}

std::string get_stack_top(LargestRectangleState& s, const Json&) {
  if (s.stack.empty()) return "The stack is empty.";
  return "stack top: " + std::to_string(s.stack.back());
}

std::string get_height_at(LargestRectangleState& s, const Json& params) {
  const auto i = checked_index(s, params, "index");
  return "height at index " + std::to_string(i) + " is " +
         std::to_string(s.heights[static_cast<std::size_t>(i)]);
}

// Rectangle of height heights[index] that extends left to just after the
// current stack top (or the start) and right to just before `right`.
std::string compute_area(LargestRectangleState& s, const Json& params) {
  const auto i = checked_index(s, params, "index");
  const auto right = detail::int_param(params, "right");
  const auto n = static_cast<std::int64_t>(s.heights.size());
  const std::int64_t left = s.stack.empty() ? -1 : s.stack.back();
  if (right <= left || right > n) {
    throw core::ToolError("right boundary " + std::to_string(right) + " must lie in (" +
                          std::to_string(left) + ", " + std::to_string(n) + "]");
  }
  const auto width = right - left - 1;
  return "area: " + std::to_string(s.heights[static_cast<std::size_t>(i)] * width);
}

class LargestRectangleEnv final : public core::TypedEnvironment<LargestRectangleState> {
 public:
  LargestRectangleEnv() {
    add_tool({"Observe", {}, "Get the histogram bar heights and the current scan index.",
              "The height list and the current index."},
             observe);
    add_tool({"PushToStack",
              {{"index", core::ValueType::Int, "Bar index to push; must exceed the stack top."}},
              "Push a bar index onto the stack and advance the scan index past it.",
              "The operation result and the current stack."},
             push_to_stack);
    add_tool({"PopFromStack", {}, "Pop the index on top of the stack.",
              "The popped index and the current stack."},
             pop_from_stack);
    add_tool({"GetStackTop", {}, "Read the index on top of the stack without removing it.",
              "The top index, or a note that the stack is empty."},
             get_stack_top);
    add_tool({"GetHeightAt", {{"index", core::ValueType::Int, "Bar index."}},
              "Read the height of one bar.", "The height of the bar."},
             get_height_at);
    add_tool({"ComputeArea",
              {{"index", core::ValueType::Int, "Index of the bar that bounds the height."},
               {"right", core::ValueType::Int, "Exclusive right boundary of the rectangle."}},
              "Compute the area of the rectangle whose height is that of the given bar, "
              "spanning from just after the current stack top (or the first bar when the stack "
              "is empty) up to, but excluding, the right boundary.",
              "The rectangle area."},
             compute_area);
    add_done_tool(core::ValueType::Int, "The maximum rectangle area.");
  }

  std::string_view name() const override { return "LargestRectangleEnv"; }

  std::span<const core::ParamSpec> config_schema() const override { return schema_; }

  std::string task_description() const override {
    return "A histogram is a row of adjacent bars, each one unit wide, with the given "
           "heights. Find the largest area of a rectangle that fits inside the histogram "
           "using a run of consecutive bars. Example: for the heights [2, 1, 5, 6, 2, 3] the "
           "largest area is 10, formed by the bars of height 5 and 6.";
  }

  std::unique_ptr<core::EnvState> initial_state(const core::TaskConfig& config) const override {
    return box({detail::int_list(config.at("heights")), 0, {}});
  }

  Json reference_answer(const core::TaskConfig& config) const override {
    return largest_rectangle_ref(detail::int_list(config.at("heights")));
  }

  // Monotonic-stack scan with a sentinel bar of height 0 at position n.
  void solve(core::ToolApi& api) const override {
    const auto info = detail::expect_live(api.call("Observe")).observation;
    const auto heights = detail::int_list(detail::json_after(info, "heights:"));
    const auto n = static_cast<std::int64_t>(heights.size());

    std::vector<std::int64_t> stack;
    std::int64_t best = 0;
    for (std::int64_t i = 0; i <= n; ++i) {
      const std::int64_t h = i < n ? heights[static_cast<std::size_t>(i)] : 0;
      while (!stack.empty() && heights[static_cast<std::size_t>(stack.back())] >= h) {
        const auto popped = detail::expect_live(api.call("PopFromStack")).observation;
        const auto top = std::stoll(popped.substr(popped.find(' ') + 1));
        stack.pop_back();
        const auto area = detail::trailing_int(
            detail::expect_live(api.call("ComputeArea", Json{{"index", top}, {"right", i}}))
                .observation);
        best = std::max(best, area);
      }
      if (i < n) {
        detail::expect_live(api.call("PushToStack", Json{{"index", i}}));
        stack.push_back(i);
      }
    }
    api.call("Done", Json{{"answer", best}});
  }

  core::TaskConfig generate_config(core::Tier tier, std::uint64_t seed) const override {
    const auto bounds = tier_bounds(name(), tier);
    Rng rng(seed);
    const int n = static_cast<int>(rng.uniform(bounds.min_size, bounds.max_size));
    auto heights = detail::random_ints(rng, n, bounds.min_value, bounds.max_value);
    if (tier == core::Tier::Hard || tier == core::Tier::Scaled) {
      switch (rng.uniform(0, 4)) {
        case 0: std::fill(heights.begin(), heights.end(), bounds.max_value); break;
        case 1: std::sort(heights.begin(), heights.end()); break;
        case 2: std::sort(heights.rbegin(), heights.rend()); break;
        default: break;
      }
    }
    return core::TaskConfig(Json{{"heights", heights}});
  }

 protected:
  void check_semantics(const core::TaskConfig& config) const override {
    const auto heights = detail::int_list(config.at("heights"));
    if (heights.empty()) {
      throw Error(ErrorCode::ConfigSchemaViolation, "LargestRectangleEnv heights must be non-empty");
    }
    if (std::any_of(heights.begin(), heights.end(), [](std::int64_t h) { return h < 0; })) {
      throw Error(ErrorCode::ConfigSchemaViolation,
                  "LargestRectangleEnv heights must be non-negative");
    }
  }

 private:
  std::vector<core::ParamSpec> schema_{
      {"heights", core::ValueType::IntList, "non-negative bar heights"},
  };
};

}  // namespace

std::int64_t largest_rectangle_ref(std::span<const std::int64_t> heights) {
  if (heights.empty()) throw Error(ErrorCode::EmptyInput, "largest_rectangle_ref: empty input");
  const auto n = heights.size();
  std::vector<std::size_t> stack;
  std::int64_t best = 0;
  for (std::size_t i = 0; i <= n; ++i) {
    const std::int64_t h = i < n ? heights[i] : 0;
    while (!stack.empty() && heights[stack.back()] >= h) {
      const auto top = stack.back();
      stack.pop_back();
      const auto left = stack.empty() ? std::int64_t{-1} : static_cast<std::int64_t>(stack.back());
      const auto width = static_cast<std::int64_t>(i) - left - 1;
      best = std::max(best, heights[top] * width);
    }
    stack.push_back(i);
  }
  return best;
}

std::shared_ptr<const core::Environment> make_largest_rectangle_env() {
  return std::make_shared<LargestRectangleEnv>();
}

}  // namespace codegym::envs
