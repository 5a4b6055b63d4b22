#include "panoworld/common.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace panoworld {

int thread_count() {
    if (const char* env = std::getenv("PANOWORLD_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) {
            return n;
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int begin, int end, const std::function<void(int)>& fn) {
    const int n = end - begin;
    if (n <= 0) {
        return;
    }
    const int workers = std::min(thread_count(), n);
    if (workers == 1) {
        for (int i = begin; i < end; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const int chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int lo = begin + w * chunk;
        const int hi = std::min(end, lo + chunk);
        if (lo >= hi) {
            break;
        }
        pool.emplace_back([lo, hi, &fn] {
            for (int i = lo; i < hi; ++i) {
                fn(i);
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
}

}  // namespace panoworld
