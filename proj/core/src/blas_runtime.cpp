#include <cstdlib>

#ifdef __GLIBC__
#include <malloc.h>

// The training graph cycles through hundreds of megabytes of short-lived
// float buffers per step. With default malloc tuning the large ones bounce
// between mmap/munmap (or heap trim), so every step pays page faults and
// zero-fills again. Keeping big allocations on the heap and never trimming
// makes the steady state fault-free; peak memory is bounded by one step's
// live set, which recurs identically every step.
__attribute__((constructor(102))) static void tune_malloc() {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
}
#endif

#ifdef VNCA_HAVE_OPENBLAS
extern "C" void openblas_set_num_threads(int);

// OpenBLAS selects its kernels inside the library's own constructor. On
// virtualized hosts the cpuid model string is often masked, which makes that
// autodetect fall back to a generic (several times slower) kernel even though
// AVX-512 is present. We link OpenBLAS statically, so a constructor with a
// priority above the default runs first and can pin the core type through the
// environment before OpenBLAS initializes. Measured on one masked host:
// 17 GF/s generic vs ~100 GF/s pinned.
__attribute__((constructor(101))) static void pin_openblas_core_type() {
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx512f")) {
    setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 0);
  }
  setenv("OPENBLAS_NUM_THREADS", "1", 0);
}
#endif

namespace vnca::detail {

// Single BLAS thread: the training loop is serial and deterministic; BLAS
// worker pools would add nondeterministic reduction orders for zero benefit
// at these matrix sizes.
void blas_single_thread() {
#ifdef VNCA_HAVE_OPENBLAS
  openblas_set_num_threads(1);
#endif
}

}  // namespace vnca::detail
