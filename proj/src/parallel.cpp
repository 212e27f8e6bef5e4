#include "kgclab/parallel.hpp"

#include <cstdlib>
#include <string>

namespace kgclab {

namespace {
std::atomic<std::size_t> g_override{0};
}

std::size_t default_threads() {
  if (auto n = g_override.load()) return n;
  if (const char* env = std::getenv("KGC_THREADS")) {
    try {
      long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  auto hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void set_default_threads(std::size_t n) { g_override = n; }

}  // namespace kgclab
