#pragma once

#include <climits>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace polyparse {

// Training frees and reallocates the same large tape buffers every step;
// keep them in the heap instead of round-tripping through mmap/munmap.
inline void retain_heap_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, INT_MAX);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace polyparse
