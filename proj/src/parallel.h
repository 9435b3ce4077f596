#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace twostage::detail {

// Runs body(chunk) for chunk in [0, num_chunks) on up to `threads` workers.
// Chunks are assigned statically, so results written per chunk do not depend
// on scheduling. The first exception thrown by any worker is rethrown.
template <typename Body>
void parallel_chunks(std::size_t num_chunks, int threads, Body&& body) {
  const std::size_t workers =
      std::min<std::size_t>(num_chunks, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t c = 0; c < num_chunks; ++c) body(c);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t c = w; c < num_chunks; c += workers) body(c);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace twostage::detail
