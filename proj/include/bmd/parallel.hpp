#pragma once

#include <cstddef>
#include <functional>

namespace bmd {

/// Worker-thread cap: min(hardware threads, BMD_THREADS env var when set).
std::size_t max_worker_threads();

/// Runs fn(begin, end) over disjoint chunks of [0, n), possibly on worker
/// threads. Chunks never overlap, so results are identical for any thread
/// count as long as fn only writes to its own range.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace bmd
