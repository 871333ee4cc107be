#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace spikesig {

// Calls body(i) for i in [0, n) on up to `jobs` threads. Each index runs
// exactly once; the first exception thrown is rethrown after all workers stop.
template <class Body> void parallel_for(std::size_t n, int jobs, Body &&body)
{
	const auto workers = static_cast<std::size_t>(std::max(1, jobs));
	if (workers == 1 || n < 2) {
		for (std::size_t i = 0; i < n; ++i)
			body(i);
		return;
	}
	std::atomic<std::size_t> next{0};
	std::atomic<bool> failed{false};
	std::exception_ptr error;
	std::mutex error_mutex;
	auto worker = [&] {
		for (;;) {
			const std::size_t i = next.fetch_add(1);
			if (i >= n || failed.load())
				return;
			try {
				body(i);
			} catch (...) {
				std::lock_guard lock(error_mutex);
				if (!error)
					error = std::current_exception();
				failed = true;
			}
		}
	};
	std::vector<std::jthread> pool;
	for (std::size_t t = 0; t < std::min(workers, n); ++t)
		pool.emplace_back(worker);
	pool.clear();
	if (error)
		std::rethrow_exception(error);
}

} // namespace spikesig
