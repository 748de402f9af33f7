#pragma once

#include <cstddef>
#include <cstdlib>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace easi {

// Honors EASI_LAB_THREADS when set; call once at program start.
inline void apply_thread_cap() {
#ifdef _OPENMP
  if (const char* env = std::getenv("EASI_LAB_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
#endif
}

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Chunked deterministic reduction. Work is split into fixed-size chunks by
// index; chunk partials may be computed on any thread, but the combine runs
// in chunk order, so the result is identical for any thread count and equals
// the serial chunked evaluation bit-for-bit.
//
// Acc must be default-constructible. fold(acc, i) adds item i into a chunk
// partial; join(total, part) merges a finished chunk into the running total.
template <class Acc, class Fold, class Join>
Acc chunked_reduce(std::size_t n, std::size_t chunk, Fold fold, Join join,
                   bool parallel = true) {
  if (chunk == 0) chunk = 1;
  std::size_t nchunks = (n + chunk - 1) / chunk;
  std::vector<Acc> partials(nchunks);

#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel && nchunks > 1)
#endif
  for (long long c = 0; c < static_cast<long long>(nchunks); ++c) {
    std::size_t lo = static_cast<std::size_t>(c) * chunk;
    std::size_t hi = lo + chunk < n ? lo + chunk : n;
    Acc part{};
    for (std::size_t i = lo; i < hi; ++i) fold(part, i);
    partials[static_cast<std::size_t>(c)] = std::move(part);
  }
  (void)parallel;

  Acc total{};
  for (std::size_t c = 0; c < nchunks; ++c) join(total, partials[c]);
  return total;
}

inline constexpr std::size_t kDefaultChunk = 1024;

}  // namespace easi
