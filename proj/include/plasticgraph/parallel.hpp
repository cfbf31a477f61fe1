#pragma once

#include <thread>
#include <vector>

namespace plasticgraph {

// Fork-join range split over worker threads. Work items must be independent;
// reductions stay deterministic because callers fold per-item results in a
// fixed serial order afterwards. n_threads <= 1 runs inline.
template <typename Fn>
void parallel_for(int n_items, int n_threads, Fn&& fn) {
  if (n_items <= 0) return;
  if (n_threads <= 1 || n_items == 1) {
    fn(0, n_items);
    return;
  }
  const int workers = std::min(n_threads, n_items);
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const int chunk = (n_items + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    const int begin = w * chunk;
    const int end = std::min(n_items, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  fn(0, std::min(chunk, n_items));
  for (auto& t : pool) t.join();
}

}  // namespace plasticgraph
