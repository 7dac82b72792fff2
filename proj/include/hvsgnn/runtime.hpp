// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace hvsgnn {

/// Keeps freed tensor buffers in the process heap instead of returning them
/// to the OS after every step. No-op outside glibc.
void configure_allocator();

}  // namespace hvsgnn
