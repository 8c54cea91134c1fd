#ifndef CONSERVA_PARALLEL_HPP
#define CONSERVA_PARALLEL_HPP

#ifdef _OPENMP
#include <omp.h>
#endif

namespace conserva {

/// Execution mode for the data-parallel kernels. Every parallel kernel has a
/// serial twin that produces bit-identical results; the serial path is the
/// reference the tests compare against and the benchmark baseline.
enum class ExecMode { serial, parallel };

inline int worker_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace conserva

#endif
