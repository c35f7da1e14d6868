#include "decodet/threading.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace decodet {

namespace {
#ifdef _OPENMP
const int kMachineThreads = omp_get_max_threads();
#else
const int kMachineThreads = 1;
#endif
}  // namespace

void set_max_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n > 0 ? n : kMachineThreads);
#else
  (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace decodet
