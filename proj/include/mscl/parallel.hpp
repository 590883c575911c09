#pragma once

#if defined(__SSE__) || defined(__x86_64__)
#include <xmmintrin.h>
#define MSCL_HAVE_MXCSR 1
#endif

namespace mscl {

// Kernels that fan out over samples or pairs take an Execution. Both paths
// reduce in index order, so they produce bitwise-identical results.
enum class Execution { serial, parallel };

int available_threads();
void set_thread_count(int threads);

// Training drives score logits into saturation, and gradients or Adam moments
// that drift into the subnormal range cost ~100x per flop on x86. This flushes
// them to zero for the current thread and restores the old mode on exit. Every
// worker sets it too, so serial and parallel runs still match.
class FlushSubnormals {
 public:
#ifdef MSCL_HAVE_MXCSR
  FlushSubnormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
  ~FlushSubnormals() { _mm_setcsr(saved_); }
#else
  FlushSubnormals() = default;
#endif
  FlushSubnormals(const FlushSubnormals&) = delete;
  FlushSubnormals& operator=(const FlushSubnormals&) = delete;

 private:
#ifdef MSCL_HAVE_MXCSR
  unsigned saved_;
#endif
};

}  // namespace mscl
