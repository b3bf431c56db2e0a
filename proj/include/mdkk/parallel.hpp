#ifndef MDKK_PARALLEL_HPP
#define MDKK_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <mutex>

#include <omp.h>

namespace mdkk
{

/// Worker count used for parallel kernels. Defaults to the OpenMP maximum,
/// capped by the MDKK_THREADS environment variable when it is set.
std::size_t worker_count();

/// Runs f(worker, i) for i in [0, n) on `workers` threads with a static
/// schedule. With workers <= 1 the loop runs inline on the caller.
/// The first exception thrown by any worker is rethrown after the loop.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& f)
{
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            f(std::size_t{0}, i);
        }
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_lock;
#pragma omp parallel num_threads(static_cast<int>(workers))
    {
        const auto worker = static_cast<std::size_t>(omp_get_thread_num());
        const auto nthreads = static_cast<std::size_t>(omp_get_num_threads());
        const std::size_t begin = n * worker / nthreads;
        const std::size_t end = n * (worker + 1) / nthreads;
        try {
            for (std::size_t i = begin; i < end; ++i) {
                f(worker, i);
            }
        } catch (...) {
            std::lock_guard<std::mutex> guard(failure_lock);
            if (!failure) {
                failure = std::current_exception();
            }
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

/// Same as parallel_for with a dynamic schedule in chunks of `grain`.
/// Used where per-item cost is irregular (neighbor loops).
template <class F>
void parallel_for_dynamic(std::size_t n, std::size_t workers, std::size_t grain, F&& f)
{
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            f(std::size_t{0}, i);
        }
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_lock;
    const auto count = static_cast<long long>(n);
    const auto chunk = static_cast<int>(grain == 0 ? 1 : grain);
#pragma omp parallel num_threads(static_cast<int>(workers))
    {
        const auto worker = static_cast<std::size_t>(omp_get_thread_num());
#pragma omp for schedule(dynamic, chunk)
        for (long long i = 0; i < count; ++i) {
            try {
                f(worker, static_cast<std::size_t>(i));
            } catch (...) {
                std::lock_guard<std::mutex> guard(failure_lock);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace mdkk

#endif
