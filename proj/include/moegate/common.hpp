#pragma once

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace moegate {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/geometry violations (mismatched operands, bad extents).
struct DimensionError : Error { using Error::Error; };
// Invalid user-supplied configuration (bad mode, K > N, p out of range).
struct ConfigError : Error { using Error::Error; };
// API contract violations (non-scalar loss, missing grad, gateless mode).
struct ContractError : Error { using Error::Error; };
// Object used in a state it cannot serve (consumed tape, cold cache tap).
struct StateError : Error { using Error::Error; };
// Malformed file contents (bad magic, truncation).
struct FormatError : Error { using Error::Error; };
// Out-of-range indices (labels outside the class range).
struct IndexError : Error { using Error::Error; };
// Non-finite value produced by a kernel; always names the operation.
struct NumericError : Error { using Error::Error; };

inline std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

namespace detail {

// Fixed-size pool; one job active at a time, chunks handed out by atomic
// counter so results never depend on worker scheduling.
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    int threads() const { return static_cast<int>(workers_.size()) + 1; }

    void run(std::int64_t n, std::int64_t grain, const std::function<void(std::int64_t, std::int64_t)>& fn) {
        if (n <= 0) return;
        thread_local bool inside = false;
        if (inside || workers_.empty() || n <= grain) {
            fn(0, n);
            return;
        }
        inside = true;
        const std::int64_t max_chunks = threads();
        chunk_ = std::max<std::int64_t>(grain, (n + max_chunks - 1) / max_chunks);
        count_ = n;
        fn_ = &fn;
        next_.store(0, std::memory_order_relaxed);
        pending_.store(static_cast<int>((n + chunk_ - 1) / chunk_), std::memory_order_relaxed);
        {
            std::lock_guard<std::mutex> lk(mu_);
            ++generation_;
        }
        cv_.notify_all();
        work();
        while (pending_.load(std::memory_order_acquire) != 0)
            std::this_thread::yield();
        fn_ = nullptr;
        inside = false;
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            stop_ = true;
            ++generation_;
        }
        cv_.notify_all();
        for (auto& t : workers_) t.join();
    }

private:
    ThreadPool() {
        int n = 0;
        if (const char* env = std::getenv("MOEGATE_THREADS"))
            n = std::atoi(env);
        if (n <= 0)
            n = static_cast<int>(std::thread::hardware_concurrency());
        if (n <= 0) n = 1;
        for (int i = 0; i + 1 < n; ++i)
            workers_.emplace_back([this, i] { worker_loop(i + 1); });
    }

    void work() {
        const auto* fn = fn_;
        if (!fn) return;
        for (;;) {
            const std::int64_t begin = next_.fetch_add(chunk_, std::memory_order_relaxed);
            if (begin >= count_) break;
            (*fn)(begin, std::min(begin + chunk_, count_));
            pending_.fetch_sub(1, std::memory_order_release);
        }
    }

    void worker_loop(int) {
        std::uint64_t seen = 0;
        for (;;) {
            {
                std::unique_lock<std::mutex> lk(mu_);
                cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
            }
            work();
        }
    }

    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
    const std::function<void(std::int64_t, std::int64_t)>* fn_ = nullptr;
    std::int64_t count_ = 0;
    std::int64_t chunk_ = 1;
    std::atomic<std::int64_t> next_{0};
    std::atomic<int> pending_{0};
};

}  // namespace detail

// Splits [0,n) into chunks; each index is processed by exactly one thread so
// numeric results are independent of the thread count.
template <class F>
void parallel_for(std::int64_t n, std::int64_t grain, F&& fn) {
    detail::ThreadPool::instance().run(n, grain, std::function<void(std::int64_t, std::int64_t)>(std::forward<F>(fn)));
}

template <typename T>
void check_finite(const std::vector<T>& values, const char* op, const char* what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(static_cast<double>(values[i])))
            throw NumericError(std::string(op) + " produced non-finite " + what + " at element " +
                               std::to_string(i));
    }
}

}  // namespace moegate
