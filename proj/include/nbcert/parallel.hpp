#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace nbcert {

/// Static-partition parallel loop. Workers only fill caller-owned slots
/// indexed by i, and any reduction happens serially afterwards, so results
/// are bitwise identical for every thread count.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (threads <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t nworkers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};

    auto body = [&]() {
        constexpr std::size_t chunk = 16;
        for (;;) {
            const std::size_t begin = next.fetch_add(chunk);
            if (begin >= n || failed.load()) return;
            const std::size_t end = std::min(begin + chunk, n);
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(nworkers - 1);
    for (std::size_t w = 1; w < nworkers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (failed.load() && error) std::rethrow_exception(error);
}

}  // namespace nbcert
