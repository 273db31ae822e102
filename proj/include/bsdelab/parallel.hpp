#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace bsdelab {

// Fixed partition size. Reductions are formed per block and combined in block
// order, so results do not depend on the number of workers.
inline constexpr std::size_t kBlockSize = 2048;

inline std::size_t block_count(std::size_t items) { return (items + kBlockSize - 1) / kBlockSize; }

// Calls fn(block, begin, end) once per block. If several blocks throw, the
// exception of the lowest block index is rethrown.
template <class Fn>
void for_each_block(std::size_t items, std::size_t workers, Fn&& fn) {
    const std::size_t blocks = block_count(items);
    if (blocks == 0) return;
    auto run = [&](std::size_t b) { fn(b, b * kBlockSize, std::min(items, (b + 1) * kBlockSize)); };
    workers = std::clamp<std::size_t>(workers, 1, blocks);
    if (workers == 1) {
        for (std::size_t b = 0; b < blocks; ++b) run(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex guard;
    std::size_t failed_block = blocks;
    std::exception_ptr failure;
    auto worker = [&] {
        for (std::size_t b = next++; b < blocks; b = next++) {
            try {
                run(b);
            } catch (...) {
                std::lock_guard lock(guard);
                if (b < failed_block) {
                    failed_block = b;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

// Pairwise (tree) summation; order is fixed by the input layout.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_mean(std::span<const double> v) {
    return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

}  // namespace bsdelab
