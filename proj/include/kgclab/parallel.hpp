#pragma once

#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace kgclab {

// Worker count: KGC_THREADS if set and positive, else hardware concurrency.
std::size_t default_threads();
void set_default_threads(std::size_t n);

// Runs body(begin, end) over fixed-size chunks of [0, n). Chunk boundaries do
// not depend on the thread count, so per-chunk partial results reduced in
// chunk order are bitwise reproducible.
template <class Body>
void parallel_chunks(std::size_t n, std::size_t chunk, Body&& body, std::size_t threads = 0) {
  if (n == 0) return;
  if (chunk == 0) chunk = 1;
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  if (threads == 0) threads = default_threads();
  threads = std::min(threads, n_chunks);
  if (threads <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) body(c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < n_chunks; c = next++) {
        try {
          body(c * chunk, std::min(n, (c + 1) * chunk));
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t threads = 0) {
  parallel_chunks(
      n, 1, [&](std::size_t begin, std::size_t) { body(begin); }, threads);
}

// SplitMix64 finaliser; used to derive independent per-item seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0, std::uint64_t d = 0) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  h = mix64(h ^ c);
  return mix64(h ^ d);
}

}  // namespace kgclab
