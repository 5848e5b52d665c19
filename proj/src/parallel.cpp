#include "mksgd/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>

namespace mksgd {

int thread_cap() {
  int cap = omp_get_max_threads();
  if (const char* env = std::getenv("MKSGD_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) cap = std::min(cap, n);
  }
  return std::max(1, cap);
}

int threads_for(Exec exec) {
  return exec == Exec::Parallel ? thread_cap() : 1;
}

}  // namespace mksgd
