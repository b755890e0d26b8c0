#include "knnloo/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace knnloo {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int threads) {
#ifdef _OPENMP
  omp_set_num_threads(threads < 1 ? 1 : threads);
#else
  (void)threads;
#endif
}

}  // namespace knnloo
