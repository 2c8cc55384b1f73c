#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace dmt {

/// Applies DMT_THREADS (if set and positive) to the OpenMP runtime.
/// Returns the resulting worker count.
int configure_threads_from_env();
int worker_count();

/// Runs body(i) for i in [0, n) across the OpenMP pool. Tasks must be
/// independent; any exception thrown by a task is rethrown on the caller
/// (the one with the lowest index wins, so failures are reproducible).
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  std::exception_ptr failure;
  std::size_t failed_index = n;
  std::mutex guard;
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(guard);
      if (static_cast<std::size_t>(i) < failed_index) {
        failed_index = static_cast<std::size_t>(i);
        failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace dmt
