#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace roofkit {

/// Runs fn(begin, end) over contiguous chunks of [begin, end), possibly on
/// several threads. Chunks never overlap, so fills of per-index buffers are
/// bit-identical no matter how many threads run. Reductions must not happen
/// inside fn; fill a buffer and reduce it in a fixed order afterwards.
template <typename Fn>
void parallel_chunks(std::size_t begin, std::size_t end, const Fn& fn) {
  const std::size_t n = end - begin;
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(std::min(hw, 8u), n);
  if (workers <= 1 || n < 2048) {
    fn(begin, end);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = begin + w * chunk;
    const std::size_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& t : threads) t.join();
}

/// Sum in a fixed pairwise order, independent of how the buffer was filled.
inline double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

}  // namespace roofkit
