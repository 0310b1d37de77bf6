#pragma once

// Error types, seeded random streams and a small deterministic worker pool
// shared by every module.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace brs {

inline constexpr const char* kVersion = "0.3.0";

/// Invalid configuration, shapes or arguments. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or failed numerical solves. Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Named sub-stream of a root seed. All randomness in a run flows from one
/// root seed through this function.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stream,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(root ^ fnv1a(stream)) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t root, std::string_view stream, std::uint64_t index = 0) {
  return Rng(derive_seed(root, stream, index));
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline int uniform_int(Rng& rng, int n) {
  return static_cast<int>(uniform01(rng) * n);
}

/// Inverse-CDF sample from a discrete distribution.
inline int sample_index(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

inline double normal(Rng& rng, double mean = 0.0, double stddev = 1.0) {
  std::normal_distribution<double> dist(mean, stddev);
  return dist(rng);
}

/// Runs fn(i) for i in [0, n). Work is split into contiguous blocks so the
/// result does not depend on the worker count as long as fn(i) only touches
/// slot i of its output.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  for (std::size_t k = 0; k < w; ++k) {
    pool.emplace_back([&, k] {
      try {
        for (std::size_t i = k * n / w; i < (k + 1) * n / w; ++i) fn(i);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Keeps freed multi-megabyte blocks in the heap. Trainers allocate and free
/// same-sized large matrices many times per step; returning them to the OS
/// each time costs a page fault per 4 KiB on the next allocation.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// Standard error of the mean; NaN when fewer than two samples.
inline double standard_error(std::span<const double> xs) {
  if (xs.size() < 2) return std::nan("");
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
}

}  // namespace brs
