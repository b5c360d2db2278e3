#pragma once

#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace otr {

// Hard cap on worker threads taken from OT_RETRIEVE_THREADS; 0 means no cap.
inline std::size_t thread_env_cap() {
    const char* raw = std::getenv("OT_RETRIEVE_THREADS");
    if (raw == nullptr || *raw == '\0') return 0;
    char* end = nullptr;
    const long v = std::strtol(raw, &end, 10);
    if (end == raw || v <= 0) return 1;  // unparsable or nonpositive: stay serial
    return static_cast<std::size_t>(v);
}

// Worker count for `jobs` independent tasks: hardware concurrency, clamped by
// the job count, the environment cap, and an optional explicit request.
inline std::size_t effective_threads(std::size_t jobs, std::size_t requested = 0) {
    std::size_t t = requested ? requested : std::thread::hardware_concurrency();
    if (t == 0) t = 1;
    const std::size_t cap = thread_env_cap();
    if (cap) t = std::min(t, cap);
    return std::max<std::size_t>(1, std::min(t, jobs));
}

// Runs body(i) for i in [0, count) across a static partition of worker
// threads. Results must be written to per-index slots so the outcome is
// independent of scheduling. The first exception thrown by any worker is
// rethrown after all workers join.
template <typename F>
inline void parallel_for(std::size_t count, F&& body, std::size_t requested_threads = 0) {
    if (count == 0) return;
    const std::size_t workers = effective_threads(count, requested_threads);
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            const std::size_t lo = count * w / workers;
            const std::size_t hi = count * (w + 1) / workers;
            try {
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace otr
