#pragma once

#include <cstddef>
#include <functional>

namespace fewshot {

/// Number of worker threads used by parallel maps. 0 selects the hardware
/// concurrency. Results never depend on this value.
void set_worker_count(unsigned workers);
unsigned worker_count();

/// Runs task(i) for every i in [0, n_tasks). Tasks are claimed dynamically,
/// so callers must write results into per-task slots and reduce afterwards
/// in task order. The first exception thrown by any task is rethrown.
void parallel_for(std::size_t n_tasks, const std::function<void(std::size_t)>& task);

/// Fixed row-chunk size for chunked map-reduce. Chunking is independent of
/// the worker count so that reductions are reproducible.
inline constexpr std::size_t kChunkRows = 4096;

inline std::size_t chunk_count(std::size_t rows) {
  return (rows + kChunkRows - 1) / kChunkRows;
}

}  // namespace fewshot
