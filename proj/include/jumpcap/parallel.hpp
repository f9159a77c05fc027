#pragma once

#include <cstddef>
#include <functional>

namespace jumpcap {

/// Number of worker threads to use; 0 requests the hardware concurrency.
int resolve_threads(int requested);

/// Runs fn(chunk_index, begin, end) over [0, count) split into fixed-size
/// chunks. Chunk boundaries depend only on chunk_size, never on the thread
/// count, so callers that write into per-chunk slots and reduce them in
/// chunk order get bit-identical results for any number of threads.
void parallel_chunks(std::size_t count, std::size_t chunk_size, int threads,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

std::size_t chunk_count(std::size_t count, std::size_t chunk_size);

/// Fixed path-batch chunk shared by the simulation engines; keeping it a
/// single constant makes shared-seed runs of different entry points line up.
inline constexpr std::size_t kPathChunk = 1024;

} // namespace jumpcap
