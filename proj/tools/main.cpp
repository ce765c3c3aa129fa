#include <iostream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "cli.hpp"

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Training allocates and frees tens of MB of activations per batch; keeping
  // them in the heap instead of fresh mmaps avoids repeated page faulting.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  return holofuse::cli::run(argc, argv, std::cout, std::cerr);
}
