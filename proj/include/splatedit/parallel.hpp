#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace splatedit {

/// Worker cap: --threads flag > SPLATEDIT_THREADS env > hardware concurrency.
inline int& thread_cap() {
    static int cap = [] {
        if (const char* env = std::getenv("SPLATEDIT_THREADS")) {
            const int n = std::atoi(env);
            if (n > 0) return n;
        }
        const unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? static_cast<int>(hw) : 1;
    }();
    return cap;
}

/// Runs fn(i) for i in [0, count). Work items must be independent; the split
/// is by contiguous blocks so results never depend on the thread count. The
/// first worker exception is rethrown on the calling thread.
inline void parallel_for(int count, const std::function<void(int)>& fn) {
    const int workers = std::min(thread_cap(), count);
    if (workers <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::mutex error_mutex;
    std::exception_ptr error;
    const int block = (count + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int lo = w * block;
        const int hi = std::min(count, lo + block);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn, &error_mutex, &error] {
            try {
                for (int i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace splatedit
