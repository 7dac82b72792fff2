// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "hvsgnn/runtime.hpp"

int main(int argc, char** argv) {
  hvsgnn::configure_allocator();
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
