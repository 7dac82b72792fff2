// SPDX-License-Identifier: Apache-2.0
#include "hvsgnn/runtime.hpp"

#include <cstdlib>  // pulls in features.h so __GLIBC__ is visible

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace hvsgnn {

void configure_allocator() {
#if defined(__GLIBC__)
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace hvsgnn
