#pragma once

#include <cstdint>
#include <functional>

namespace corseg {

// 0 restores the default (hardware concurrency, capped at 16).
void set_thread_count(int n);
int thread_count();

// Invokes fn(begin, end) over disjoint index ranges covering [0, n).
// fn must only write state owned by its own range; results are then
// independent of the thread count, including thread_count() == 1.
void parallel_ranges(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

// Per-index convenience wrapper with the same ownership rule.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

// Like parallel_for, but splits even small n across workers. For loops whose
// per-index cost is large (whole planes, whole point sets).
void parallel_for_coarse(std::int64_t n, const std::function<void(std::int64_t)>& fn);

} // namespace corseg
