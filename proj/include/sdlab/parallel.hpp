#pragma once

#include <cstddef>
#include <functional>

namespace sdlab {

/// Worker count: SD_LAB_THREADS if set to a positive integer, else hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, n) on up to thread_count() threads.
/// Work is split into contiguous static chunks; the first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace sdlab
