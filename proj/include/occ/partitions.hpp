#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace occ {

using Blocks = std::vector<std::vector<std::size_t>>;

/// Calls fn(blocks) once for every set partition of `items`, in restricted
/// growth string order (the single-block partition first).
template <typename Fn>
void for_each_set_partition(const std::vector<std::size_t>& items, Fn&& fn) {
  const std::size_t n = items.size();
  if (n == 0) {
    fn(Blocks{});
    return;
  }
  std::vector<std::size_t> rgs(n, 0), maxes(n, 0);  // maxes[i] = max(rgs[0..i-1])
  while (true) {
    std::size_t blocks = 0;
    for (auto b : rgs) blocks = std::max(blocks, b + 1);
    Blocks out(blocks);
    for (std::size_t i = 0; i < n; ++i) out[rgs[i]].push_back(items[i]);
    fn(out);

    std::size_t i = n - 1;
    while (i > 0 && rgs[i] == maxes[i] + 1) --i;
    if (i == 0) return;
    ++rgs[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      rgs[j] = 0;
      maxes[j] = std::max(maxes[j - 1], rgs[j - 1]);
    }
  }
}

inline std::uint64_t bell_number(std::size_t n) {
  std::vector<std::uint64_t> row{1};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::uint64_t> next{row.back()};
    for (auto x : row) next.push_back(next.back() + x);
    row = std::move(next);
  }
  return row.front();
}

}  // namespace occ
