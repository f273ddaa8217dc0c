// Fixed-partition data parallelism. Work is always cut into the same chunks
// regardless of the thread count, so reductions merged in chunk order are
// reproducible across thread settings.
#pragma once

#include <cstddef>
#include <functional>

namespace vptrap {

void set_num_threads(int threads);
int num_threads();

/// Calls fn(chunk, lo, hi) for `chunks` contiguous slices of [0, count).
void parallel_chunks(std::size_t count, int chunks,
                     const std::function<void(int, std::size_t, std::size_t)>& fn);

/// Elementwise loop over [0, count) split into one slice per thread.
void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace vptrap
