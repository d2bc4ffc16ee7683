#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace smgaa {

/// The image and network buffers sit just above glibc's mmap threshold, so by
/// default every temporary is mapped and unmapped again. Keeping them on the
/// heap roughly halves the cost of an attack step. Call once at startup.
inline void tune_allocator() noexcept {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
}

}  // namespace smgaa
