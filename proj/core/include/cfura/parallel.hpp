#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

#include "cfura/types.hpp"

namespace cfura {

/// Worker count used by parallel_for; 0 means hardware concurrency.
void set_num_threads(unsigned n);
unsigned num_threads();

namespace detail {
bool& inside_parallel_region();
}

/// Runs f(i) for i in [0, n). Callers write results into per-index slots, so output does not
/// depend on scheduling. Nested calls run serially. The exception of the lowest failing index
/// propagates.
template <class F>
void parallel_for(Index n, F&& f) {
  const unsigned workers = std::min<unsigned>(num_threads(), static_cast<unsigned>(std::max<Index>(n, 0)));
  if (workers <= 1 || detail::inside_parallel_region()) {
    for (Index i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<Index> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  auto body = [&] {
    detail::inside_parallel_region() = true;
    for (Index i; (i = next.fetch_add(1)) < n;) {
      try {
        f(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
    detail::inside_parallel_region() = false;
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace cfura
