#include "support/oracles.hpp"

#include <algorithm>
#include <limits>
#include <map>

namespace codegym::testing {

std::int64_t brute_closest(const std::vector<std::int64_t>& values, std::int64_t k) {
  std::int64_t best = values.at(0);
  for (auto v : values) {
    const auto d = v > k ? v - k : k - v;
    const auto bd = best > k ? best - k : k - best;
    if (d < bd || (d == bd && v < best)) best = v;
  }
  return best;
}

std::int64_t brute_rectangle(const std::vector<std::int64_t>& heights) {
  std::int64_t best = 0;
  for (std::size_t i = 0; i < heights.size(); ++i) {
    std::int64_t low = std::numeric_limits<std::int64_t>::max();
    for (std::size_t j = i; j < heights.size(); ++j) {
      low = std::min(low, heights[j]);
      best = std::max(best, low * static_cast<std::int64_t>(j - i + 1));
    }
  }
  return best;
}

std::vector<std::int64_t> brute_modes(const std::vector<std::int64_t>& scores) {
  std::map<std::int64_t, int> counts;
  for (auto s : scores) ++counts[s];
  int top = 0;
  for (const auto& [v, c] : counts) top = std::max(top, c);
  std::vector<std::int64_t> out;
  for (const auto& [v, c] : counts) {
    if (c == top) out.push_back(v);
  }
  return out;
}

namespace {

std::int64_t edit(const std::string& a, const std::string& b, std::size_t i, std::size_t j,
                  std::map<std::pair<std::size_t, std::size_t>, std::int64_t>& memo) {
  if (i == a.size()) return static_cast<std::int64_t>(b.size() - j);
  if (j == b.size()) return static_cast<std::int64_t>(a.size() - i);
  const auto key = std::make_pair(i, j);
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  std::int64_t r;
  if (a[i] == b[j]) {
    r = edit(a, b, i + 1, j + 1, memo);
  } else {
    r = 1 + std::min({edit(a, b, i + 1, j, memo), edit(a, b, i, j + 1, memo),
                      edit(a, b, i + 1, j + 1, memo)});
  }
  memo[key] = r;
  return r;
}

}  // namespace

std::int64_t brute_edit_distance(const std::string& a, const std::string& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::int64_t> memo;
  return edit(a, b, 0, 0, memo);
}

void for_each_sequence(const std::vector<std::int64_t>& alphabet, int max_len,
                       const std::function<void(const std::vector<std::int64_t>&)>& fn) {
  std::vector<std::int64_t> seq;
  std::function<void()> rec = [&] {
    fn(seq);
    if (static_cast<int>(seq.size()) == max_len) return;
    for (auto v : alphabet) {
      seq.push_back(v);
      rec();
      seq.pop_back();
    }
  };
  rec();
}

}  // namespace codegym::testing
