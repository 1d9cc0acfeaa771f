#pragma once

// Training allocates and frees many large matrices per step. With glibc's
// defaults those come from mmap and every step page-faults them in again,
// which costs more kernel time than the arithmetic. Applications call this
// once at startup to keep freed memory in the heap instead.

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace apt {

inline void retain_freed_memory() {
#if defined(__GLIBC__)
  constexpr int kLarge = 1 << 30;
  mallopt(M_MMAP_THRESHOLD, kLarge);
  mallopt(M_TRIM_THRESHOLD, kLarge);
#endif
}

}  // namespace apt
