#include "bst/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace bst {
namespace {

std::atomic<std::size_t> g_override{0};

// Below this much work a thread launch costs more than it saves.
constexpr std::size_t kInlineWork = 1u << 18;

}  // namespace

std::size_t worker_count() {
  if (std::size_t forced = g_override.load(); forced != 0) return forced;
  if (const char* env = std::getenv("BST_THREADS"); env != nullptr && *env != '\0') {
    try {
      long parsed = std::stol(env);
      if (parsed >= 1) return static_cast<std::size_t>(parsed);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void set_worker_count(std::size_t workers) { g_override.store(workers); }

void parallel_for(std::size_t n, std::size_t cost_per_item,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1 || n * std::max<std::size_t>(cost_per_item, 1) < kInlineWork) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    std::size_t begin = w * chunk;
    if (begin >= n) break;
    std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  fn(0, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace bst
