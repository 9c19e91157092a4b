// SPDX-License-Identifier: Apache-2.0
//
// satcell: uplink simulation and power control for integrated
// satellite + cell-free terrestrial networks.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#ifndef SATCELL_PARALLEL_HPP
#define SATCELL_PARALLEL_HPP

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace satcell {

// Runs fn(i) for i in [0, n). Work items must write only to their own slot
// of any shared output so that results are independent of scheduling; the
// thread count then affects wall time only.
inline void parallel_for(int n, int threads, const std::function<void(int)> &fn) {
    if (n <= 0)
        return;
    if (threads <= 0)
        threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1)
        threads = 1;
    if (threads == 1 || n == 1) {
        for (int i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= n || failed.load())
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true))
                    error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int count = std::min(threads, n);
    pool.reserve(count);
    for (int t = 0; t < count; ++t)
        pool.emplace_back(worker);
    for (auto &th : pool)
        th.join();
    if (error)
        std::rethrow_exception(error);
}

} // namespace satcell

#endif
