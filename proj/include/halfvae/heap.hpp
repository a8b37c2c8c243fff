#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace halfvae {

// Training allocates the same multi-megabyte temporaries every step. glibc
// serves those with mmap/munmap by default, which costs about as much as the
// arithmetic; keeping them on the heap removes that. No-op elsewhere.
inline void keep_large_buffers_on_heap() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

}  // namespace halfvae
