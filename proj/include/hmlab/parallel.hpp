#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "hmlab/error.hpp"

namespace hmlab {

// Worker count from HMLAB_THREADS, else the hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("HMLAB_THREADS"); env && *env) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1 || v > 1024) throw ConfigError(std::string("HMLAB_THREADS must be a positive integer, got '") + env + "'");
        return static_cast<int>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// out[i] = f(i) for i < n. Each slot is written by exactly one task, so the result does not depend
// on the worker count. The first exception (lowest index) is rethrown.
template <class R, class F>
std::vector<R> parallel_map(std::size_t n, F f, int workers = 0) {
    std::vector<R> out(n);
    if (workers <= 0) workers = worker_count();
    workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto run = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                out[i] = f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace hmlab
