#pragma once

#include <cstddef>
#include <cstdint>

namespace knnloo {

/// Number of worker threads parallel kernels will use (1 without OpenMP).
int max_threads();

/// Sets the worker count for subsequent parallel kernels. Values < 1 are
/// treated as 1.
void set_threads(int threads);

/// Restores the previous worker count on scope exit.
class ThreadScope {
 public:
  explicit ThreadScope(int threads) : previous_(max_threads()) { set_threads(threads); }
  ~ThreadScope() { set_threads(previous_); }
  ThreadScope(const ThreadScope&) = delete;
  ThreadScope& operator=(const ThreadScope&) = delete;

 private:
  int previous_;
};

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a) {
  return mix64(seed ^ mix64(a));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

}  // namespace knnloo
