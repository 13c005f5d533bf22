#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace lfc {

/// Runs fn(begin, end, worker) over `total` items split into at most `jobs`
/// contiguous chunks. Chunk boundaries depend only on (total, jobs), so any
/// per-worker accumulation can be reduced in worker order deterministically.
inline void parallel_chunks(int total, int jobs,
                            const std::function<void(int, int, int)>& fn) {
  if (total <= 0) return;
  jobs = std::max(1, std::min(jobs, total));
  if (jobs == 1) {
    fn(0, total, 0);
    return;
  }
  std::vector<std::thread> threads;
  const int base = total / jobs;
  const int extra = total % jobs;
  int begin = 0;
  for (int w = 0; w < jobs; ++w) {
    const int len = base + (w < extra ? 1 : 0);
    const int end = begin + len;
    threads.emplace_back([&fn, begin, end, w] { fn(begin, end, w); });
    begin = end;
  }
  for (std::thread& t : threads) t.join();
}

}  // namespace lfc
