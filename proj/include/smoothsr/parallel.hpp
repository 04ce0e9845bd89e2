#pragma once

#include <cstddef>
#include <functional>

namespace smoothsr {

// Resolves a thread-count request: n > 0 is taken as-is, n <= 0 falls back to
// the SMOOTHSR_THREADS environment variable and then to the machine's
// hardware concurrency.
int resolve_threads(int requested);

// Runs body(i) for i in [0, count). Work items are claimed from a shared
// atomic counter, so callers must write results into per-index slots; outputs
// are then independent of scheduling and thread count.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace smoothsr
