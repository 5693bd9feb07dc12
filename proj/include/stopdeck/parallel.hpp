#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>

namespace stopdeck {

// Caps the number of worker threads used by library routines. Zero restores
// the default (hardware concurrency). Results never depend on this value.
void set_thread_count(std::size_t threads);
std::size_t thread_count();

// Runs body(chunk_index, begin, end) over [0, n) split into fixed chunks of
// `grain` elements. The chunking depends only on n and grain, never on the
// thread count, so per-chunk partial results can be reduced in chunk order
// for thread-count independent output.
void parallel_chunks(std::size_t n, std::size_t grain,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

inline std::size_t chunk_count(std::size_t n, std::size_t grain) {
  return grain == 0 ? 0 : (n + grain - 1) / grain;
}

}  // namespace stopdeck
