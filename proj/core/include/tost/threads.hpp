#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace tost {

// Worker count used by the parallel loops in the attention forward passes.
// 1 (the default) means fully serial. Outputs are identical for any count:
// workers own disjoint slices and nothing is reduced across threads.
void set_threads(int n);
int threads();

// Runs fn(lo, hi) over a partition of [begin, end) into at most threads()
// contiguous chunks. Serial when threads() == 1.
template <typename Fn>
void parallel_chunks(std::size_t begin, std::size_t end, Fn&& fn) {
  if (begin >= end) return;
  const std::size_t total = end - begin;
  const std::size_t nt = static_cast<std::size_t>(threads());
  if (nt <= 1 || total <= 1) {
    fn(begin, end);
    return;
  }
  const std::size_t chunks = std::min(nt, total);
  const std::size_t base = total / chunks;
  const std::size_t rem = total % chunks;
  std::vector<std::thread> workers;
  workers.reserve(chunks);
  std::size_t lo = begin;
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t hi = lo + base + (c < rem ? 1 : 0);
    workers.emplace_back([lo, hi, &fn] { fn(lo, hi); });
    lo = hi;
  }
  for (auto& w : workers) w.join();
}

}  // namespace tost
