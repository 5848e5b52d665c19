#pragma once

namespace mksgd {

// Execution policy for the data-parallel kernels. Serial runs the same loop
// bodies on one thread; results are bitwise identical either way because
// every output element has a single writer and a fixed accumulation order.
enum class Exec { Serial, Parallel };

// Thread cap: min(MKSGD_THREADS, omp_get_max_threads()); 1 when OpenMP is off.
int thread_cap();

// Number of threads a parallel region should use under the given policy.
int threads_for(Exec exec);

}  // namespace mksgd
