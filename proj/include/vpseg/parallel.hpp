#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vpseg {

// Parallel map over [0, n). Each index must write disjoint outputs; all
// reductions in this codebase stay serial (or combine in fixed index
// order) so results are bitwise independent of the thread count.
template <typename Fn>
inline void parallel_for(std::int64_t n, Fn&& fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) fn(i);
#else
  for (std::int64_t i = 0; i < n; ++i) fn(i);
#endif
}

inline int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace vpseg
