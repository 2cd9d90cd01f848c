#pragma once

#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace metamix {

inline int default_workers() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Run f(i) for i in [0, n). workers <= 0 means the OpenMP default,
// workers == 1 is a plain serial loop (the reference path). Bodies must
// write only to their own output slot; with that discipline the result is
// bitwise independent of the schedule and worker count.
template <class F>
void parallel_for(int n, int workers, F&& f) {
  if (workers == 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
#ifdef _OPENMP
  if (workers > 0) {
#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (int i = 0; i < n; ++i) f(i);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) f(i);
  }
#else
  for (int i = 0; i < n; ++i) f(i);
#endif
}

}  // namespace metamix
