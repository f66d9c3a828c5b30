#pragma once

#include <cstddef>
#include <functional>

namespace focus {

enum class Execution { Sequential, Parallel };

// Worker count for Execution::Parallel: hardware concurrency capped by the
// FOCUS_THREADS environment variable when set. Always >= 1.
std::size_t worker_count();

// Calls fn(i) for i in [0, n). Parallel mode splits the range into contiguous
// chunks across worker_count() threads; with one worker it runs inline.
// Callers write results into per-index slots so output order never depends
// on scheduling.
void parallel_for(std::size_t n, Execution exec, const std::function<void(std::size_t)>& fn);

}  // namespace focus
