// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mlp {

/// Calls fn(i) for i in [0, count) on up to \p workers threads. Work items
/// must write to disjoint storage; the first exception thrown is rethrown.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            std::size_t const i = next.fetch_add(1);
            if (i >= count || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        unsigned const n = static_cast<unsigned>(std::min<std::size_t>(workers, count));
        pool.reserve(n);
        for (unsigned w = 0; w < n; ++w) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
}

inline unsigned default_workers() {
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace mlp
