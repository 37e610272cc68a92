#include "bmd/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace bmd {

std::size_t max_worker_threads() {
    std::size_t limit = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("BMD_THREADS")) {
        try {
            const long parsed = std::stol(env);
            if (parsed >= 1) limit = std::min<std::size_t>(limit, static_cast<std::size_t>(parsed));
        } catch (...) {
            // unparseable value: keep the hardware limit
        }
    }
    return limit;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers = std::min(max_worker_threads(), n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace bmd
